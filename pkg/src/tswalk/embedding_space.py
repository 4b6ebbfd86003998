"""PCA projection of D-GDV rows, keeping enough components for a variance target."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCensusError, ValidationError


@dataclass
class PcaModel:
    means: np.ndarray  # (P,)
    components: np.ndarray  # (P, j), orthonormal columns
    explained_variance_ratio: np.ndarray  # (j,)
    scale: np.ndarray | None = None  # per-column std when fitted with standardize=True

    @property
    def num_components(self) -> int:
        return self.components.shape[1]

    def project(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        if rows.shape[-1] != len(self.means):
            raise ValidationError(f"expected {len(self.means)} columns, got {rows.shape[-1]}")
        centered = rows - self.means
        if self.scale is not None:
            centered = centered / self.scale
        return centered @ self.components

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"# P={len(self.means)} j={self.num_components}\n")
            fh.write("ratios " + " ".join(repr(float(r)) for r in self.explained_variance_ratio) + "\n")
            fh.write("means " + " ".join(repr(float(x)) for x in self.means) + "\n")
            if self.scale is not None:
                fh.write("scale " + " ".join(repr(float(x)) for x in self.scale) + "\n")
            for i, row in enumerate(self.components.T):
                fh.write(f"pc{i} " + " ".join(repr(float(x)) for x in row) + "\n")

    @classmethod
    def load(cls, path) -> PcaModel:
        fields = {}
        comps = []
        with open(path) as fh:
            for line in fh:
                if line.startswith("#"):
                    continue
                key, *vals = line.split()
                arr = np.array([float(v) for v in vals])
                if key.startswith("pc"):
                    comps.append(arr)
                else:
                    fields[key] = arr
        return cls(fields["means"], np.array(comps).T.reshape(len(fields["means"]), -1),
                   fields["ratios"], fields.get("scale"))


def project(model: PcaModel, row) -> np.ndarray:
    return model.project(row)


def fit_pca(matrix, variance_target: float = 0.9, standardize: bool = False) -> PcaModel:
    """Mean-center (optionally scale) and keep the fewest components reaching ``variance_target``."""
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValidationError("PCA needs a 2-d matrix with at least two rows")
    if not 0 < variance_target <= 1:
        raise ValidationError("variance_target must lie in (0, 1]")
    means = x.mean(axis=0)
    centered = x - means
    scale = None
    if standardize:
        scale = centered.std(axis=0)
        scale[scale == 0] = 1.0
        centered = centered / scale
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    var = s ** 2
    total = var.sum()
    if total <= 0 or not np.isfinite(total) or s[0] <= 1e-12 * max(1.0, np.abs(centered).max()):
        raise DegenerateCensusError("degenerate census; increase m_max or Δt")
    ratios = var / total
    cum = np.cumsum(ratios)
    j = int(np.searchsorted(cum, variance_target - 1e-12) + 1)
    j = max(1, min(j, len(s)))
    comps = vt[:j].T.copy()
    # sign convention: largest-magnitude entry of each component is positive
    idx = np.argmax(np.abs(comps), axis=0)
    signs = np.sign(comps[idx, np.arange(j)])
    signs[signs == 0] = 1.0
    comps *= signs
    return PcaModel(means, comps, ratios[:j], scale)
