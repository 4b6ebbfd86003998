"""Node classification: one-vs-rest logistic regression, stratified k-fold, macro AP / AUROC."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit
from scipy.stats import rankdata
from sklearn.model_selection import KFold, StratifiedKFold

from .errors import ValidationError

logger = logging.getLogger(__name__)


class UndefinedMetricError(ValueError):
    """Scores need at least one positive and one negative."""


def _check_binary(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape:
        raise ValidationError("scores and labels differ in length")
    npos = int(labels.sum())
    if npos == 0 or npos == len(labels):
        raise UndefinedMetricError("need at least one positive and one negative")
    return scores, labels


def average_precision(scores, labels) -> float:
    """Mean precision at the rank of each positive; ties keep input order.

    Summed in exact rational arithmetic and rounded once.
    """
    scores, labels = _check_binary(scores, labels)
    order = np.argsort(-scores, kind="stable")
    hits = labels[order]
    ranks = np.flatnonzero(hits) + 1
    total = sum(Fraction(i + 1, int(r)) for i, r in enumerate(ranks))
    return float(total / len(ranks))


def auroc(scores, labels) -> float:
    """P(random positive outranks random negative), ties counted as 1/2."""
    scores, labels = _check_binary(scores, labels)
    ranks = rankdata(scores)
    npos = int(labels.sum())
    nneg = len(labels) - npos
    return (ranks[labels].sum() - npos * (npos + 1) / 2) / (npos * nneg)


def _fit_binary(X, y, l2):
    """Minimize sum log(1 + exp(-s * (Xw + b))) + l2/2 |w|^2 for s in {-1, +1}."""
    s = np.where(y, 1.0, -1.0)
    d = X.shape[1]

    def fun(theta):
        w, b = theta[:d], theta[d]
        z = s * (X @ w + b)
        loss = np.logaddexp(0.0, -z).sum() + 0.5 * l2 * (w @ w)
        r = -s * expit(-z)
        grad = np.concatenate([X.T @ r + l2 * w, [r.sum()]])
        return loss, grad

    res = minimize(fun, np.zeros(d + 1), jac=True, method="L-BFGS-B",
                   options={"gtol": 1e-6, "maxiter": 1000, "ftol": 0.0})
    if not res.success and res.nit >= 1000:
        warnings.warn(f"logistic regression did not converge: {res.message}", RuntimeWarning)
    return res.x[:d], res.x[d]


@dataclass
class OvRScorer:
    classes: np.ndarray
    coef: np.ndarray  # (C, d)
    intercept: np.ndarray  # (C,)
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    def _prep(self, X):
        X = np.asarray(X, dtype=float)
        if self.mean is not None:
            X = (X - self.mean) / self.std
        return X

    def decision_function(self, X) -> np.ndarray:
        return self._prep(X) @ self.coef.T + self.intercept

    def predict_proba(self, X) -> np.ndarray:
        """Per-class one-vs-rest probabilities (columns follow ``classes``)."""
        return expit(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        return self.classes[np.argmax(self.decision_function(X), axis=1)]


def train_logreg_ovr(X, y, l2: float = 1.0, classes=None, standardize: bool = True) -> OvRScorer:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    present = np.unique(y)
    classes = present if classes is None else np.asarray(classes)
    if len(classes) < 2:
        raise ValidationError("need at least two classes")
    missing = np.setdiff1d(classes, present)
    if len(missing):
        raise ValidationError(f"classes absent from training data: {missing.tolist()}")
    mean = std = None
    if standardize:
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std[std == 0] = 1.0
        X = (X - mean) / std
    coefs, bs = [], []
    for c in classes:
        w, b = _fit_binary(X, y == c, l2)
        coefs.append(w)
        bs.append(b)
    return OvRScorer(classes, np.array(coefs), np.array(bs), mean, std)


@dataclass
class EvalReport:
    fold_ap: list[float]
    fold_auroc: list[float]
    per_class: dict = field(default_factory=dict)  # class name -> {"ap": [...], "auroc": [...]}
    config: dict = field(default_factory=dict)

    @property
    def ap_mean(self) -> float:
        return float(np.mean(self.fold_ap))

    @property
    def ap_std(self) -> float:
        return float(np.std(self.fold_ap))

    @property
    def auroc_mean(self) -> float:
        return float(np.mean(self.fold_auroc))

    @property
    def auroc_std(self) -> float:
        return float(np.std(self.fold_auroc))

    def table(self) -> str:
        lines = [f"{'fold':>6} {'macro-AP':>10} {'macro-AUROC':>12}"]
        for i, (a, r) in enumerate(zip(self.fold_ap, self.fold_auroc)):
            lines.append(f"{i:>6} {a:>10.4f} {r:>12.4f}")
        lines.append(f"{'mean':>6} {self.ap_mean:>10.4f} {self.auroc_mean:>12.4f}")
        lines.append(f"{'std':>6} {self.ap_std:>10.4f} {self.auroc_std:>12.4f}")
        if self.config:
            lines.append("config: " + " ".join(f"{k}={v}" for k, v in self.config.items()))
        return "\n".join(lines) + "\n"

    def rows(self) -> list[tuple]:
        out = []
        for i, (a, r) in enumerate(zip(self.fold_ap, self.fold_auroc)):
            out.append((str(i), "macro_ap", repr(float(a))))
            out.append((str(i), "macro_auroc", repr(float(r))))
        for name, vals in self.per_class.items():
            for i, (a, r) in enumerate(zip(vals["ap"], vals["auroc"])):
                out.append((str(i), f"ap[{name}]", repr(float(a))))
                out.append((str(i), f"auroc[{name}]", repr(float(r))))
        return out

    def write(self, txt_path=None, tsv_path=None) -> None:
        if txt_path is not None:
            with open(txt_path, "w") as fh:
                fh.write(self.table())
        if tsv_path is not None:
            with open(tsv_path, "w") as fh:
                fh.write("fold\tmetric\tvalue\n")
                for row in self.rows():
                    fh.write("\t".join(row) + "\n")


def fold_indices(y, folds: int = 5, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    y = np.asarray(y)
    if len(y) < folds:
        raise ValidationError(f"{len(y)} labeled nodes cannot fill {folds} folds")
    _, counts = np.unique(y, return_counts=True)
    if counts.min() >= folds:
        splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    else:
        warnings.warn("a class has fewer members than folds; using unstratified folds", RuntimeWarning)
        splitter = KFold(n_splits=folds, shuffle=True, random_state=seed)
    return list(splitter.split(np.zeros(len(y)), y))


def macro_scores(proba, y_test, classes) -> tuple[float, float, dict]:
    aps, rocs, per = [], [], {}
    for j, c in enumerate(classes):
        target = y_test == c
        try:
            ap = average_precision(proba[:, j], target)
            roc = auroc(proba[:, j], target)
        except UndefinedMetricError:
            continue
        aps.append(ap)
        rocs.append(roc)
        per[c] = (ap, roc)
    if not aps:
        raise UndefinedMetricError("no class has both positives and negatives in the test fold")
    return float(np.mean(aps)), float(np.mean(rocs)), per


def cross_validate(X, y, folds: int = 5, seed: int = 0, l2: float = 1.0,
                   standardize: bool = True, class_names=None, config=None) -> EvalReport:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    names = class_names if class_names is not None else [str(c) for c in np.unique(y)]
    report = EvalReport([], [], config=dict(config or {}))
    per_class = {str(n): {"ap": [], "auroc": []} for n in names}
    all_classes = np.unique(y)
    for train_idx, test_idx in fold_indices(y, folds, seed):
        classes = np.unique(y[train_idx])
        model = train_logreg_ovr(X[train_idx], y[train_idx], l2=l2, classes=classes,
                                 standardize=standardize)
        ap, roc, per = macro_scores(model.predict_proba(X[test_idx]), y[test_idx], classes)
        report.fold_ap.append(ap)
        report.fold_auroc.append(roc)
        for c in all_classes:
            key = str(names[int(c)]) if class_names is not None else str(c)
            a, r = per.get(c, (float("nan"), float("nan")))
            per_class[key]["ap"].append(a)
            per_class[key]["auroc"].append(r)
    report.per_class = per_class
    return report
