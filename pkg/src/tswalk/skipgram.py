"""Skip-gram with negative sampling over walk corpora."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator

import numba
import numpy as np

from .errors import ValidationError
from .walker import WalkCorpus

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    dims: int = 32
    window: int = 10
    negatives: int = 5
    epochs: int = 5
    lr: float = 0.025
    min_lr: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.dims < 1 or self.window < 1 or self.negatives < 1:
            raise ValidationError("dims, window and negatives must be >= 1")
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")


@dataclass
class NoiseDistribution:
    probs: np.ndarray
    cdf: np.ndarray

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size) * self.cdf[-1]
        return np.minimum(np.searchsorted(self.cdf, u, side="right"), len(self.cdf) - 1)


@dataclass(eq=False)
class EmbeddingMatrix:
    vectors: np.ndarray  # input vectors, the published embedding
    context: np.ndarray | None = None
    labels: list[str] | None = None
    objective: list[float] = field(default_factory=list)  # epoch means

    @property
    def shape(self):
        return self.vectors.shape


def _flatten(walks) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.fromiter((len(w) for w in walks), dtype=np.int64, count=len(walks))
    ptr = np.zeros(len(walks) + 1, dtype=np.int64)
    np.cumsum(lengths, out=ptr[1:])
    tokens = np.fromiter((v for w in walks for v in w), dtype=np.int64, count=int(ptr[-1]))
    return tokens, ptr


def build_noise(corpus: WalkCorpus | list, num_nodes: int | None = None) -> NoiseDistribution:
    """Unigram frequencies raised to 3/4, normalized."""
    walks = corpus.walks if isinstance(corpus, WalkCorpus) else corpus
    tokens, _ = _flatten(walks)
    if len(tokens) == 0:
        raise ValidationError("empty corpus")
    counts = np.bincount(tokens, minlength=num_nodes or 0).astype(float)
    w = counts ** 0.75
    probs = w / w.sum()
    return NoiseDistribution(probs, np.cumsum(probs))


def positive_pairs(walks, window: int) -> Iterator[tuple[int, int]]:
    for w in walks:
        n = len(w)
        for i in range(n):
            for j in range(max(0, i - window), min(n, i + window + 1)):
                if j != i:
                    yield w[i], w[j]


def pair_count(length: int, window: int) -> int:
    i = np.arange(length)
    return int(np.sum(np.minimum(i, window) + np.minimum(length - 1 - i, window)))


def pair_objective(w, u_pos, u_negs) -> float:
    """``log s(u_pos.w) + sum log s(-u_neg.w)`` for one positive pair."""
    def log_sigmoid(x):
        return -np.logaddexp(0.0, -x)
    return float(log_sigmoid(u_pos @ w) + np.sum(log_sigmoid(-(u_negs @ w))))


def pair_gradient(w, u_pos, u_negs):
    """Analytic gradient of :func:`pair_objective` w.r.t. ``(w, u_pos, u_negs)``."""
    def sigmoid(x):
        return 0.5 * (1.0 + np.tanh(0.5 * x))
    gp = 1.0 - sigmoid(u_pos @ w)
    gn = -sigmoid(u_negs @ w)
    grad_w = gp * u_pos + gn @ u_negs
    return grad_w, gp * w, np.outer(gn, w)


@numba.njit(cache=True)
def _log_sigmoid(x):
    if x >= 0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


@numba.njit(cache=True)
def _sgns_pair(W, U, v, c, negs, lr, grad):
    """One ascent step on a (center, context) pair with given negatives; returns the pair objective."""
    d = W.shape[1]
    for k in range(d):
        grad[k] = 0.0
    obj = 0.0
    for n in range(-1, len(negs)):
        x = c if n < 0 else negs[n]
        label = 1.0 if n < 0 else 0.0
        f = 0.0
        for k in range(d):
            f += U[x, k] * W[v, k]
        if n < 0:
            obj += _log_sigmoid(f)
        else:
            obj += _log_sigmoid(-f)
        g = lr * (label - 1.0 / (1.0 + np.exp(-f)))
        for k in range(d):
            grad[k] += g * U[x, k]
            U[x, k] += g * W[v, k]
    for k in range(d):
        W[v, k] += grad[k]
    return obj


@numba.njit(cache=True)
def _walk_pass(tokens, lo, hi, W, U, cdf, window, negatives, lr0, min_lr,
               pair_offset, total_pairs, seed):
    np.random.seed(seed)
    grad = np.empty(W.shape[1])
    negs = np.empty(negatives, dtype=np.int64)
    total = cdf[-1]
    obj = 0.0
    k = pair_offset
    for i in range(lo, hi):
        v = tokens[i]
        for j in range(max(lo, i - window), min(hi, i + window + 1)):
            if j == i:
                continue
            c = tokens[j]
            for n in range(negatives):
                x = min(np.searchsorted(cdf, np.random.random() * total, side="right"), len(cdf) - 1)
                if x == c:
                    x = min(np.searchsorted(cdf, np.random.random() * total, side="right"), len(cdf) - 1)
                negs[n] = x
            lr = lr0 - (lr0 - min_lr) * k / total_pairs
            if lr < min_lr:
                lr = min_lr
            obj += _sgns_pair(W, U, v, c, negs, lr, grad)
            k += 1
    return obj


@numba.njit(cache=True)
def _walk_seed(seed, epoch, walk):
    h = (seed * 1000003 + epoch) * 1000033 + walk
    return h % 4294967296


@numba.njit(cache=True)
def _epoch_serial(tokens, ptr, W, U, cdf, window, negatives, lr0, min_lr,
                  offsets, total_pairs, seed, epoch, objs):
    for w in range(len(ptr) - 1):
        objs[w] = _walk_pass(tokens, ptr[w], ptr[w + 1], W, U, cdf, window, negatives, lr0,
                             min_lr, offsets[w], total_pairs, _walk_seed(seed, epoch, w))


@numba.njit(parallel=True, cache=True)
def _epoch_parallel(tokens, ptr, W, U, cdf, window, negatives, lr0, min_lr,
                    offsets, total_pairs, seed, epoch, objs):
    # lock-free shared updates; races on W/U rows are tolerated
    for w in numba.prange(len(ptr) - 1):
        objs[w] = _walk_pass(tokens, ptr[w], ptr[w + 1], W, U, cdf, window, negatives, lr0,
                             min_lr, offsets[w], total_pairs, _walk_seed(seed, epoch, w))


def init_vectors(num_nodes: int, dims: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    return (rng.random((num_nodes, dims)) - 0.5) / dims, np.zeros((num_nodes, dims))


def train(corpus: WalkCorpus | list, cfg: TrainConfig, num_nodes: int | None = None,
          threads: int = 1) -> EmbeddingMatrix:
    walks = corpus.walks if isinstance(corpus, WalkCorpus) else corpus
    tokens, ptr = _flatten(walks)
    if len(np.unique(tokens)) < 2:
        raise ValidationError("corpus must cover at least two nodes")
    n = num_nodes if num_nodes is not None else int(tokens.max()) + 1
    noise = build_noise(walks, n)
    W, U = init_vectors(n, cfg.dims, cfg.seed)
    per_walk = np.array([pair_count(int(b - a), cfg.window) for a, b in zip(ptr[:-1], ptr[1:])],
                        dtype=np.int64)
    epoch_pairs = int(per_walk.sum())
    total_pairs = max(1, epoch_pairs * cfg.epochs)
    starts = np.concatenate([[0], np.cumsum(per_walk)[:-1]]).astype(np.int64)
    objs = np.zeros(len(walks))
    history = []
    kernel = _epoch_serial
    if threads > 1:
        kernel = _epoch_parallel
        numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
    for epoch in range(cfg.epochs):
        kernel(tokens, ptr, W, U, noise.cdf, cfg.window, cfg.negatives, cfg.lr, cfg.min_lr,
               starts + epoch * epoch_pairs, total_pairs, cfg.seed, epoch, objs)
        if not (np.isfinite(W).all() and np.isfinite(U).all()):
            raise FloatingPointError(f"non-finite parameters after epoch {epoch}; lower the learning rate")
        history.append(float(objs.sum() / max(1, epoch_pairs)))
        logger.debug("epoch %d mean pair objective %.6f", epoch, history[-1])
    return EmbeddingMatrix(W, U, objective=history)


def export_embeddings(e: EmbeddingMatrix, path, labels=None) -> None:
    labels = labels if labels is not None else e.labels
    n, d = e.vectors.shape
    with open(path, "w") as fh:
        fh.write(f"{n} {d}\n")
        for i, row in enumerate(e.vectors):
            name = labels[i] if labels is not None else str(i)
            fh.write(name + " " + " ".join(repr(float(x)) for x in row) + "\n")


def load_embeddings(path) -> EmbeddingMatrix:
    with open(path) as fh:
        n, d = map(int, fh.readline().split())
        labels, rows = [], []
        for line in fh:
            parts = line.split()
            labels.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    vectors = np.array(rows, dtype=float).reshape(n, d)
    return EmbeddingMatrix(vectors, labels=labels)
