"""Timestamped edge multisets with time-ordered per-node adjacency."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

_SPLIT = re.compile(r"[,\s]+")


@dataclass(eq=False)
class TemporalGraph:
    """Dynamic network ``G = (V, E_T)`` with dense node ids.

    Edges are kept in insertion order in ``src``/``dst``/``t``. The CSR
    adjacency (``adj_ptr``, ``adj_edge``, ``adj_nbr``, ``adj_t``) lists, for
    every node, the edges it can traverse (outgoing only when directed),
    sorted by ``(t, neighbor, edge id)``.
    """

    labels: list[str]
    src: np.ndarray
    dst: np.ndarray
    t: np.ndarray
    directed: bool = False
    skipped_self_loops: int = 0
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.int64)
        self.dst = np.asarray(self.dst, dtype=np.int64)
        self.t = np.asarray(self.t, dtype=np.int64)
        if not (len(self.src) == len(self.dst) == len(self.t)):
            raise ValidationError("edge arrays differ in length")
        n = len(self.labels)
        self.index = {lab: i for i, lab in enumerate(self.labels)}
        if len(self.index) != n:
            raise ValidationError("duplicate node labels")
        if len(self.src):
            if min(self.src.min(), self.dst.min()) < 0 or max(self.src.max(), self.dst.max()) >= n:
                raise ValidationError("edge endpoint outside node range")
            if np.any(self.src == self.dst):
                raise ValidationError("self-loops are not allowed")
            if self.t.min() < 0:
                raise ValidationError("timesteps must be non-negative")
        self._build_adjacency()

    def _build_adjacency(self):
        n = self.num_nodes
        eid = np.arange(self.num_edges, dtype=np.int64)
        if self.directed:
            owner, nbr, eids = self.src, self.dst, eid
        else:
            owner = np.concatenate([self.src, self.dst])
            nbr = np.concatenate([self.dst, self.src])
            eids = np.concatenate([eid, eid])
        ts = self.t[eids]
        order = np.lexsort((eids, nbr, ts, owner))
        self.adj_edge = eids[order]
        self.adj_nbr = nbr[order]
        self.adj_t = ts[order]
        self.adj_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(owner, minlength=n), out=self.adj_ptr[1:])

    @classmethod
    def from_edges(cls, edges: Iterable[Sequence], directed: bool = False) -> TemporalGraph:
        """Build a graph from ``(src, dst, t)`` triples with arbitrary hashable labels."""
        labels: list[str] = []
        index: dict[str, int] = {}
        src, dst, ts = [], [], []
        loops = 0
        for a, b, t in edges:
            a, b, t = str(a), str(b), int(t)
            if t < 0:
                raise ValidationError(f"negative timestep {t}")
            if a == b:
                loops += 1
                continue
            for lab in (a, b):
                if lab not in index:
                    index[lab] = len(labels)
                    labels.append(lab)
            src.append(index[a])
            dst.append(index[b])
            ts.append(t)
        return cls(labels, np.array(src), np.array(dst), np.array(ts), directed=directed,
                   skipped_self_loops=loops)

    @property
    def num_nodes(self) -> int:
        return len(self.labels)

    @property
    def num_edges(self) -> int:
        return len(self.src)

    @property
    def t_max(self) -> int:
        return int(self.t.max()) if self.num_edges else -1

    @property
    def num_timesteps(self) -> int:
        return len(np.unique(self.t))

    def summary(self) -> str:
        return f"nodes={self.num_nodes} edges={self.num_edges} timesteps={self.num_timesteps}"

    def edge(self, e: int) -> tuple[int, int, int]:
        return int(self.src[e]), int(self.dst[e]), int(self.t[e])

    def neighborhood_bounds(self, v: int, t: int, strict: bool = False) -> tuple[int, int]:
        """Slice of the CSR arrays holding the edges of ``v`` at time ``>= t`` (``> t`` if strict)."""
        lo, hi = self.adj_ptr[v], self.adj_ptr[v + 1]
        side = "right" if strict else "left"
        return int(lo + np.searchsorted(self.adj_t[lo:hi], t, side=side)), int(hi)

    def temporal_neighborhood(self, v: int, t: int, strict: bool = False) -> list[tuple[int, int, int]]:
        """Edges ``v`` can walk at or after ``t`` as ``(edge id, neighbor, t')``, ascending in ``t'``."""
        if not 0 <= v < self.num_nodes:
            raise ValidationError(f"unknown node id {v}")
        lo, hi = self.neighborhood_bounds(v, t, strict)
        return [(int(e), int(u), int(tt)) for e, u, tt in
                zip(self.adj_edge[lo:hi], self.adj_nbr[lo:hi], self.adj_t[lo:hi])]

    def edge_multiset(self) -> list[tuple[str, str, int]]:
        out = []
        for a, b, t in zip(self.src, self.dst, self.t):
            a, b = self.labels[a], self.labels[b]
            if not self.directed and b < a:
                a, b = b, a
            out.append((a, b, int(t)))
        return sorted(out)


def load_edge_list(path, directed: bool = False) -> TemporalGraph:
    """Read ``src dst t`` lines (whitespace or comma separated; ``#`` comments allowed)."""
    edges = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p for p in _SPLIT.split(line) if p]
            if len(parts) != 3:
                raise ParseError(f"{path}:{lineno}: expected 'src dst t', got {raw.strip()!r}")
            try:
                t = int(parts[2])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: timestep {parts[2]!r} is not an integer") from None
            if t < 0:
                raise ValidationError(f"{path}:{lineno}: negative timestep {t}")
            edges.append((parts[0], parts[1], t))
    g = TemporalGraph.from_edges(edges, directed=directed)
    if g.skipped_self_loops:
        logger.warning("skipped %d self-loop(s) in %s", g.skipped_self_loops, path)
    return g


def write_edge_list(g: TemporalGraph, path) -> None:
    with open(path, "w") as fh:
        for a, b, t in zip(g.src, g.dst, g.t):
            fh.write(f"{g.labels[a]} {g.labels[b]} {t}\n")


@dataclass
class NodeLabels:
    """Class assignment for a subset of nodes; unlabeled nodes are left out."""

    nodes: np.ndarray
    classes: np.ndarray
    class_names: list[str]

    def __len__(self):
        return len(self.nodes)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


def load_labels(path, g: TemporalGraph) -> NodeLabels:
    pairs = []
    unknown = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p for p in _SPLIT.split(line) if p]
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected 'node class', got {raw.strip()!r}")
            node, cls = parts
            if node not in g.index:
                unknown.append(node)
                continue
            pairs.append((g.index[node], cls))
    if unknown:
        raise ValidationError(f"labels reference unknown nodes: {', '.join(unknown)}")
    seen = {}
    for node, cls in pairs:
        if seen.setdefault(node, cls) != cls:
            raise ValidationError(f"node {g.labels[node]} has conflicting labels")
    class_names = sorted(set(seen.values()))
    if len(class_names) < 2:
        raise ValidationError("need at least two classes")
    cid = {c: i for i, c in enumerate(class_names)}
    nodes = np.array(sorted(seen), dtype=np.int64)
    classes = np.array([cid[seen[v]] for v in nodes], dtype=np.int64)
    return NodeLabels(nodes, classes, class_names)
