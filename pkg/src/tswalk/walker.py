"""Temporal-structural random walks.

From node ``v`` at time ``t`` the walker takes a structural step with
probability ``alpha`` (a similarity edge chosen proportionally to its weight;
time unchanged) and a temporal step otherwise (an edge at ``t' >= t`` chosen
with probability proportional to ``exp(t - t')``; time becomes ``t'``).
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .similarity import SimilarityNetwork
from .temporal_graph import TemporalGraph

START_MODES = ("uniform", "earliest")


@dataclass(frozen=True)
class WalkConfig:
    alpha: float = 0.0
    walk_length: int = 10
    num_walks: int = 100
    strict_time: bool = False
    seed: int = 0
    start: str = "uniform"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.walk_length < 2:
            raise ValidationError("walk_length must be >= 2")
        if self.num_walks < 0:
            raise ValidationError("num_walks must be >= 0")
        if self.start not in START_MODES:
            raise ValidationError(f"start must be one of {START_MODES}")


@dataclass
class WalkCorpus:
    walks: list[list[int]] = field(default_factory=list)
    times: list[list[int]] | None = field(default_factory=list)
    temporal_steps: int = 0
    structural_steps: int = 0
    early_terminations: int = 0

    def __len__(self):
        return len(self.walks)

    def extend(self, other: WalkCorpus) -> None:
        self.walks.extend(other.walks)
        if self.times is not None and other.times is not None:
            self.times.extend(other.times)
        self.temporal_steps += other.temporal_steps
        self.structural_steps += other.structural_steps
        self.early_terminations += other.early_terminations

    def dump(self, path, labels) -> None:
        with open(path, "w") as fh:
            fh.write(f"# temporal_steps={self.temporal_steps} structural_steps={self.structural_steps}"
                     f" early_terminations={self.early_terminations}\n")
            for w in self.walks:
                fh.write(" ".join(labels[v] for v in w) + "\n")

    @classmethod
    def load(cls, path, labels) -> WalkCorpus:
        index = {lab: i for i, lab in enumerate(labels)}
        corpus = cls(times=None)
        with open(path) as fh:
            for line in fh:
                if line.startswith("#"):
                    stats = dict(kv.split("=") for kv in line[1:].split())
                    corpus.temporal_steps = int(stats["temporal_steps"])
                    corpus.structural_steps = int(stats["structural_steps"])
                    corpus.early_terminations = int(stats["early_terminations"])
                elif line.strip():
                    corpus.walks.append([index[x] for x in line.split()])
        return corpus


def temporal_distribution(g: TemporalGraph, v: int, t: int,
                          strict: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Candidate edge ids of ``v`` from time ``t`` on, with their transition probabilities."""
    lo, hi = g.neighborhood_bounds(v, t, strict)
    if lo == hi:
        return g.adj_edge[lo:hi], np.empty(0)
    # shifting by the earliest candidate keeps exp() from underflowing; ratios are unchanged
    w = np.exp(g.adj_t[lo] - g.adj_t[lo:hi].astype(float))
    return g.adj_edge[lo:hi], w / w.sum()


def structural_distribution(s: SimilarityNetwork, v: int) -> tuple[np.ndarray, np.ndarray]:
    nbrs, w = s.neighbors(v)
    return nbrs, w / w.sum()


def _draw(weights_cum: np.ndarray, u: float) -> int:
    i = int(np.searchsorted(weights_cum, u * weights_cum[-1], side="right"))
    return min(i, len(weights_cum) - 1)


class _Walker:
    """Per-graph caches shared by all walks of a corpus."""

    def __init__(self, g: TemporalGraph, s: SimilarityNetwork | None, cfg: WalkConfig):
        if g.num_edges == 0:
            raise ValidationError("graph has no temporal edges")
        if cfg.alpha > 0 and s is None:
            raise ValidationError("alpha > 0 needs a similarity network")
        self.g, self.s, self.cfg = g, s, cfg
        if s is not None:
            # per-node cumulative weights, so each slice ends at that node's total
            self.s_cum = np.empty(len(s.weights))
            for v in range(s.num_nodes):
                lo, hi = s.ptr[v], s.ptr[v + 1]
                self.s_cum[lo:hi] = np.cumsum(s.weights[lo:hi])
        self.adj_t_float = g.adj_t.astype(float)
        self.earliest = np.flatnonzero(g.t == g.t.min())

    def _structural(self, v):
        lo, hi = self.s.ptr[v], self.s.ptr[v + 1]
        if lo == hi:
            return None
        return lo, hi

    def walk(self, rng: np.random.Generator) -> tuple[list[int], list[int], int, int]:
        g, cfg = self.g, self.cfg
        alpha = cfg.alpha
        if cfg.start == "uniform":
            e = int(rng.integers(g.num_edges))
        else:
            e = int(self.earliest[rng.integers(len(self.earliest))])
        u, v, t = int(g.src[e]), int(g.dst[e]), int(g.t[e])
        if not g.directed and rng.random() < 0.5:
            u, v = v, u
        nodes, times = [u, v], [t, t]
        n_temporal = n_structural = 0
        while len(nodes) < cfg.walk_length:
            structural = alpha == 1.0 or (alpha > 0.0 and rng.random() < alpha)
            if not structural:
                lo, hi = g.neighborhood_bounds(v, t, cfg.strict_time)
                if lo == hi:
                    # dead end in time: fall back to a structural step with probability alpha
                    if alpha > 0.0 and rng.random() < alpha and self._structural(v):
                        structural = True
                    else:
                        break
                else:
                    w = np.exp(self.adj_t_float[lo] - self.adj_t_float[lo:hi])
                    j = lo + _draw(np.cumsum(w), rng.random())
                    v, t = int(g.adj_nbr[j]), int(g.adj_t[j])
                    n_temporal += 1
            if structural:
                span = self._structural(v)
                if span is None:
                    lo, hi = g.neighborhood_bounds(v, t, cfg.strict_time)
                    if lo == hi:
                        break
                    w = np.exp(self.adj_t_float[lo] - self.adj_t_float[lo:hi])
                    j = lo + _draw(np.cumsum(w), rng.random())
                    v, t = int(g.adj_nbr[j]), int(g.adj_t[j])
                    n_temporal += 1
                else:
                    lo, hi = span
                    v = int(self.s.nbrs[lo + _draw(self.s_cum[lo:hi], rng.random())])
                    n_structural += 1
            nodes.append(v)
            times.append(t)
        return nodes, times, n_temporal, n_structural


def walk_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def sample_walk(g: TemporalGraph, s: SimilarityNetwork | None, cfg: WalkConfig,
                rng: np.random.Generator) -> list[int]:
    return _Walker(g, s, cfg).walk(rng)[0]


def _corpus_range(g, s, cfg, lo, hi) -> WalkCorpus:
    walker = _Walker(g, s, cfg)
    out = WalkCorpus()
    for i in range(lo, hi):
        nodes, times, nt, ns = walker.walk(walk_rng(cfg.seed, i))
        out.walks.append(nodes)
        out.times.append(times)
        out.temporal_steps += nt
        out.structural_steps += ns
        out.early_terminations += len(nodes) < cfg.walk_length
    return out


def _corpus_range_star(args):
    return _corpus_range(*args)


def generate_corpus(g: TemporalGraph, s: SimilarityNetwork | None, cfg: WalkConfig,
                    threads: int = 1) -> WalkCorpus:
    """``cfg.num_walks`` walks; walk ``i`` draws from its own stream seeded by ``(seed, i)``."""
    if g.num_edges == 0:
        raise ValidationError("graph has no temporal edges")
    beta = cfg.num_walks
    if threads <= 1 or beta < 2 * threads:
        return _corpus_range(g, s, cfg, 0, beta)
    bounds = np.linspace(0, beta, threads + 1).astype(int)
    jobs = [(g, s, cfg, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
    corpus = WalkCorpus()
    with ProcessPoolExecutor(max_workers=threads) as pool:
        for part in pool.map(_corpus_range_star, jobs):
            corpus.extend(part)
    return corpus

