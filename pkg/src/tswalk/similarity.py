"""Top-k structural similarity network over projected D-GDV rows."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


def similarity(d: float) -> float:
    if d < 0:
        raise ValidationError(f"distance must be non-negative, got {d}")
    return 1.0 / (1.0 + d)


@dataclass(eq=False)
class SimilarityNetwork:
    """Per-node retained neighbors in CSR form, strongest first."""

    ptr: np.ndarray
    nbrs: np.ndarray
    weights: np.ndarray
    k: int

    @property
    def num_nodes(self) -> int:
        return len(self.ptr) - 1

    def neighbors(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.ptr[v], self.ptr[v + 1]
        return self.nbrs[lo:hi], self.weights[lo:hi]

    def as_dict(self, v: int) -> dict[int, float]:
        nb, w = self.neighbors(v)
        return {int(u): float(x) for u, x in zip(nb, w)}

    def dump(self, path, labels=None) -> None:
        name = (lambda i: labels[i]) if labels is not None else str
        with open(path, "w") as fh:
            fh.write(f"# k={self.k}\n")
            for v in range(self.num_nodes):
                for u, w in zip(*self.neighbors(v)):
                    fh.write(f"{name(v)} {name(int(u))} {float(w)!r}\n")

    @classmethod
    def load(cls, path, labels) -> SimilarityNetwork:
        index = {lab: i for i, lab in enumerate(labels)}
        k = 0
        rows = [[] for _ in labels]
        with open(path) as fh:
            for line in fh:
                if line.startswith("#"):
                    k = int(line.split("=")[1])
                    continue
                a, b, w = line.split()
                rows[index[a]].append((index[b], float(w)))
        ptr = np.zeros(len(labels) + 1, dtype=np.int64)
        ptr[1:] = np.cumsum([len(r) for r in rows])
        nbrs = np.array([u for r in rows for u, _ in r], dtype=np.int64)
        weights = np.array([w for r in rows for _, w in r], dtype=float)
        return cls(ptr, nbrs, weights, k)


def pairwise_distances(points) -> np.ndarray:
    """Exact Euclidean distances (row differences, so identical rows give exactly 0)."""
    x = np.asarray(points, dtype=float)
    n = len(x)
    block = max(1, (1 << 22) // max(1, n * x.shape[1]))
    out = np.empty((n, n))
    for lo in range(0, n, block):
        diff = x[lo:lo + block, None, :] - x[None, :, :]
        out[lo:lo + block] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return out


def build_similarity_network(proj, k: int, symmetrize: bool = False) -> SimilarityNetwork:
    """Keep each node's ``k`` most similar others; ties go to the smaller node id.

    With ``symmetrize`` an edge kept by either endpoint is added to both lists.
    """
    proj = np.asarray(proj, dtype=float)
    if proj.ndim == 1:
        proj = proj[:, None]
    n = len(proj)
    if n < 2:
        raise ValidationError("need at least two nodes")
    if not 1 <= k <= n - 1:
        raise ValidationError(f"k must lie in [1, {n - 1}], got {k}")
    weights = 1.0 / (1.0 + pairwise_distances(proj))
    ids = np.arange(n)
    keep = []
    for v in range(n):
        w = weights[v].copy()
        w[v] = -np.inf
        order = np.lexsort((ids, -w))[:k]
        keep.append(order)
    if symmetrize:
        sets = [set(map(int, o)) for o in keep]
        for v in range(n):
            for u in keep[v]:
                sets[int(u)].add(v)
        keep = []
        for v in range(n):
            cand = np.array(sorted(sets[v]), dtype=np.int64)
            keep.append(cand[np.lexsort((cand, -weights[v, cand]))])
    ptr = np.zeros(n + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(o) for o in keep])
    nbrs = np.concatenate(keep).astype(np.int64)
    src = np.repeat(ids, np.diff(ptr))
    return SimilarityNetwork(ptr, nbrs, weights[src, nbrs], k)
