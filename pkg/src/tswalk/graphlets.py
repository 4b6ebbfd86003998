"""Constrained dynamic graphlet census and dynamic graphlet degree vectors (D-GDV).

A dynamic graphlet occurrence is a sequence of events ``e_1 < ... < e_j`` in
the global event order (timestamp, then edge id) such that

* consecutive events share at least one node,
* ``t(e_{i+1}) - t(e_i) <= delta_t``,
* the sequence touches at most ``n_max`` nodes and ``j <= m_max``.

Occurrences are grouped into types by an order-preserving canonical code, and
every participating node gets one count in the orbit its position belongs to.

The census itself runs in a numba kernel. Each partial sequence is encoded
by labeling nodes in order of first appearance (first event oriented as
stored), which yields a "raw code" integer. All raw codes a config can
produce are enumerated up front and canonicalized in Python. The kernel then
only does a binary search per occurrence.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numba
import numpy as np

from .errors import ValidationError
from .temporal_graph import TemporalGraph

logger = logging.getLogger(__name__)

Code = tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class CensusConfig:
    n_max: int = 4
    m_max: int = 3
    delta_t: int = 1

    def __post_init__(self):
        if self.n_max < 2:
            raise ValidationError("n_max must be >= 2")
        if self.m_max < 1:
            raise ValidationError("m_max must be >= 1")
        if self.delta_t < 0:
            raise ValidationError("delta_t must be non-negative")
        if self.m_max * 2 * math.log2(self.n_max) >= 62:
            raise ValidationError(f"n_max={self.n_max}, m_max={self.m_max} overflows the 64-bit code")


@dataclass(frozen=True)
class CanonicalForm:
    code: Code
    labeling: dict  # input node -> canonical position
    orbits: tuple[int, ...]  # canonical position -> orbit id


def _pair(x: int, y: int, directed: bool) -> tuple[int, int]:
    return (x, y) if directed or x < y else (y, x)


def _relabelings(events: Sequence[tuple], directed: bool):
    """Yield every first-appearance labeling, branching when an event brings two new nodes."""
    def rec(i, lab):
        if i == len(events):
            yield lab
            return
        a, b = events[i][0], events[i][1]
        new = [x for x in (a, b) if x not in lab]
        if len(new) < 2:
            if new:
                lab = {**lab, new[0]: len(lab)}
            yield from rec(i + 1, lab)
        else:
            k = len(lab)
            yield from rec(i + 1, {**lab, a: k, b: k + 1})
            yield from rec(i + 1, {**lab, b: k, a: k + 1})

    yield from rec(0, {})


def _apply(events, lab, directed) -> Code:
    return tuple(_pair(lab[e[0]], lab[e[1]], directed) for e in events)


@lru_cache(maxsize=None)
def orbits_of(code: Code, directed: bool = False) -> tuple[int, ...]:
    """Orbit id of each position under the permutations that fix every event of ``code``."""
    n = 1 + max(max(p) for p in code)
    parent = list(range(n))
    for perm in itertools.permutations(range(n)):
        if all(_pair(perm[a], perm[b], directed) == (a, b) for a, b in code):
            for x in range(n):
                rx, ry = min(parent[x], parent[perm[x]]), max(parent[x], parent[perm[x]])
                for y in range(n):
                    if parent[y] == ry:
                        parent[y] = rx
    reps = sorted(set(parent))
    return tuple(reps.index(p) for p in parent)


def canonical_code(events: Sequence[tuple], directed: bool = False) -> CanonicalForm:
    """Order-preserving canonical form of an event sequence.

    ``events`` are ``(u, v)`` or ``(u, v, t)`` tuples already in temporal order;
    timestamps only matter through that order. The code is the
    lexicographically smallest relabeled event tuple, with undirected pairs
    written smaller label first.
    """
    if not events:
        raise ValidationError("empty event sequence")
    best = None
    for lab in _relabelings(events, directed):
        code = _apply(events, lab, directed)
        if best is None or code < best[0]:
            best = (code, lab)
    code, lab = best
    return CanonicalForm(code, lab, orbits_of(code, directed))


def graphlet_type_count(n: int, m: int) -> int:
    """Closed-form number of constrained undirected dynamic graphlet types with n nodes and m events."""
    if n < 3 or m < 1:
        raise ValidationError("formula needs n >= 3 and m >= 1")
    total = sum(
        Fraction((-1) ** (n + i) * math.comb(n - 2, i) * (2 * i + 1) ** (m - 1))
        for i in range(n - 1)
    ) / (2 * math.factorial(n - 2))
    if total.denominator != 1:
        raise ArithmeticError(f"S({n},{m}) = {total} is not an integer")
    return int(total)


@dataclass(frozen=True)
class GraphletType:
    type_id: int
    code: Code
    orbits: tuple[int, ...]

    @property
    def num_nodes(self) -> int:
        return len(self.orbits)

    @property
    def num_events(self) -> int:
        return len(self.code)

    @property
    def num_orbits(self) -> int:
        return max(self.orbits) + 1


def _raw_sequences(n_max: int, m_max: int, directed: bool):
    """All first-appearance labeled constrained sequences, first event (0, 1)."""
    def rec(seq, k):
        yield seq
        if len(seq) == m_max:
            return
        prev = seq[-1]
        top = k + 1 if k < n_max else k
        for x in range(top):
            for y in range(top):
                if x == y or (not directed and x > y):
                    continue
                if x not in prev and y not in prev:
                    continue
                if x == k and y == k:
                    continue
                # the new node, if any, takes label k by construction
                yield from rec(seq + ((x, y),), max(k, x + 1, y + 1))

    yield from rec(((0, 1),), 2)


def _encode(code: Code, n_max: int) -> int:
    out = 0
    for x, y in code:
        out = out * n_max * n_max + x * n_max + y
    return out


class GraphletCatalog:
    """Every dynamic graphlet type reachable under a census config.

    Types are numbered by ``(events, nodes, code)``; orbit columns by
    ``(type_id, orbit_id)``. Both orders depend only on the config.
    """

    def __init__(self, cfg: CensusConfig, directed: bool = False):
        self.config = cfg
        self.directed = directed
        n = cfg.n_max
        raw_map = {}
        forms = {}
        for seq in _raw_sequences(n, cfg.m_max, directed):
            form = canonical_code(seq, directed)
            forms.setdefault(form.code, form.orbits)
            raw_map[_encode(seq, n)] = (form.code, form.labeling)
        codes = sorted(forms, key=lambda c: (len(c), 1 + max(max(p) for p in c), c))
        self.types = [GraphletType(i, c, forms[c]) for i, c in enumerate(codes)]
        self._by_code = {t.code: t for t in self.types}
        self.columns: list[tuple[int, int]] = []
        first_col = {}
        for t in self.types:
            first_col[t.type_id] = len(self.columns)
            self.columns.extend((t.type_id, o) for o in range(t.num_orbits))

        keys = np.array(sorted(raw_map), dtype=np.int64)
        table = np.full((len(keys), n), -1, dtype=np.int64)
        for r, key in enumerate(keys):
            code, lab = raw_map[int(key)]
            t = self._by_code[code]
            for raw_label, pos in lab.items():
                table[r, raw_label] = first_col[t.type_id] + t.orbits[pos]
        self.raw_keys = keys
        self.raw_table = table

    def __len__(self):
        return len(self.types)

    def __contains__(self, code):
        return code in self._by_code

    def __getitem__(self, code) -> GraphletType:
        return self._by_code[code]

    @property
    def num_orbits(self) -> int:
        return len(self.columns)

    def column_key(self, col: int) -> tuple[Code, int]:
        type_id, orbit = self.columns[col]
        return self.types[type_id].code, orbit

    def count_types(self, num_nodes: int, num_events: int) -> int:
        return sum(1 for t in self.types if t.num_nodes == num_nodes and t.num_events == num_events)


@lru_cache(maxsize=16)
def build_catalog(cfg: CensusConfig, directed: bool = False) -> GraphletCatalog:
    return GraphletCatalog(cfg, directed)


@dataclass(eq=False)
class DGDVMatrix:
    """Per-node orbit counts restricted to the orbits seen in the graph."""

    counts: np.ndarray
    columns: list[tuple[int, int]]
    node_labels: list[str]
    occurrences: int = 0

    @property
    def shape(self):
        return self.counts.shape

    def column_names(self) -> list[str]:
        return [f"g{t}_o{o}" for t, o in self.columns]

    def keyed(self, catalog: GraphletCatalog) -> dict:
        """``{(node label, code, orbit): count}`` for the non-zero cells."""
        out = {}
        for j, (t, o) in enumerate(self.columns):
            code = catalog.types[t].code
            for i in np.flatnonzero(self.counts[:, j]):
                out[(self.node_labels[i], code, o)] = int(self.counts[i, j])
        return out


def census_summary(dgdv: DGDVMatrix) -> str:
    types = {t for t, _ in dgdv.columns}
    return f"types={len(types)} orbits={len(dgdv.columns)} occurrences={dgdv.occurrences}"


@numba.njit(cache=True)
def _candidates(ev_u, ev_v, ev_t, inc_ptr, inc_pos, delta_t):
    """For each event position, later events within delta_t sharing an endpoint."""
    m = len(ev_u)
    ptr = np.zeros(m + 1, dtype=np.int64)
    for phase in range(2):
        if phase == 1:
            out = np.empty(ptr[m], dtype=np.int64)
        for p in range(m):
            cnt = 0
            a, b = ev_u[p], ev_v[p]
            ia = inc_ptr[a] + np.searchsorted(inc_pos[inc_ptr[a]:inc_ptr[a + 1]], p, side="right")
            ib = inc_ptr[b] + np.searchsorted(inc_pos[inc_ptr[b]:inc_ptr[b + 1]], p, side="right")
            ea, eb = inc_ptr[a + 1], inc_ptr[b + 1]
            limit = ev_t[p] + delta_t
            while True:
                qa = inc_pos[ia] if ia < ea and ev_t[inc_pos[ia]] <= limit else -1
                qb = inc_pos[ib] if ib < eb and ev_t[inc_pos[ib]] <= limit else -1
                if qa < 0 and qb < 0:
                    break
                if qb < 0 or (qa >= 0 and qa < qb):
                    q = qa
                    ia += 1
                elif qa < 0 or qb < qa:
                    q = qb
                    ib += 1
                else:
                    q = qa
                    ia += 1
                    ib += 1
                if phase == 1:
                    out[ptr[p] + cnt] = q
                cnt += 1
            if phase == 0:
                ptr[p + 1] = ptr[p] + cnt
    return ptr, out


@numba.njit(cache=True)
def _census_starts(starts, ev_u, ev_v, cand_ptr, cand, n_max, m_max, directed,
                   raw_keys, raw_table, counts):
    """Depth-first extension from each start event; returns the occurrence count."""
    base = n_max * n_max
    nodes = np.empty(n_max, dtype=np.int64)
    seq = np.empty(m_max, dtype=np.int64)
    it = np.empty(m_max, dtype=np.int64)
    codes = np.empty(m_max, dtype=np.int64)
    ks = np.empty(m_max, dtype=np.int64)
    total = 0
    for s in range(len(starts)):
        p0 = starts[s]
        nodes[0] = ev_u[p0]
        nodes[1] = ev_v[p0]
        seq[0] = p0
        codes[0] = 1
        ks[0] = 2
        it[0] = cand_ptr[p0]
        depth = 1
        # count the single event
        row = np.searchsorted(raw_keys, codes[0])
        for lab in range(2):
            counts[nodes[lab], raw_table[row, lab]] += 1
        total += 1
        while depth > 0:
            last = seq[depth - 1]
            if depth == m_max or it[depth - 1] >= cand_ptr[last + 1]:
                depth -= 1
                continue
            q = cand[it[depth - 1]]
            it[depth - 1] += 1
            k = ks[depth - 1]
            x = -1
            y = -1
            for lab in range(k):
                if nodes[lab] == ev_u[q]:
                    x = lab
                if nodes[lab] == ev_v[q]:
                    y = lab
            newk = k
            if x < 0:
                x = newk
                newk += 1
            if y < 0:
                y = newk
                newk += 1
            if newk > n_max:
                continue
            if x == k:
                nodes[k] = ev_u[q]
            if y == k:
                nodes[k] = ev_v[q]
            if not directed and x > y:
                x, y = y, x
            code = codes[depth - 1] * base + x * n_max + y
            row = np.searchsorted(raw_keys, code)
            for lab in range(newk):
                counts[nodes[lab], raw_table[row, lab]] += 1
            total += 1
            seq[depth] = q
            codes[depth] = code
            ks[depth] = newk
            it[depth] = cand_ptr[q]
            depth += 1
    return total


@numba.njit(parallel=True, cache=True)
def _census_parallel(chunks, ev_u, ev_v, cand_ptr, cand, n_max, m_max, directed,
                     raw_keys, raw_table, counts, totals):
    for c in numba.prange(len(chunks)):
        c = np.int64(c)
        totals[c] = _census_starts(chunks[c], ev_u, ev_v, cand_ptr, cand, n_max, m_max,
                                   directed, raw_keys, raw_table, counts[c])


def event_order(g: TemporalGraph) -> np.ndarray:
    """Edge ids sorted by (timestamp, edge id)."""
    return np.lexsort((np.arange(g.num_edges), g.t))


def enumerate_census(g: TemporalGraph, cfg: CensusConfig,
                     threads: int = 1) -> tuple[GraphletCatalog, DGDVMatrix]:
    if g.num_edges == 0:
        raise ValidationError("graph has no temporal edges")
    catalog = build_catalog(cfg, g.directed)
    order = event_order(g)
    ev_u = g.src[order]
    ev_v = g.dst[order]
    ev_t = g.t[order]
    n = g.num_nodes
    owner = np.concatenate([ev_u, ev_v])
    pos = np.concatenate([np.arange(len(order))] * 2)
    srt = np.lexsort((pos, owner))
    inc_pos = pos[srt].astype(np.int64)
    inc_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(owner, minlength=n), out=inc_ptr[1:])
    cand_ptr, cand = _candidates(ev_u, ev_v, ev_t, inc_ptr, inc_pos, np.int64(cfg.delta_t))

    p_all = catalog.num_orbits
    starts = np.arange(len(order), dtype=np.int64)
    if threads <= 1:
        counts = np.zeros((n, p_all), dtype=np.int64)
        total = _census_starts(starts, ev_u, ev_v, cand_ptr, cand, cfg.n_max, cfg.m_max,
                               g.directed, catalog.raw_keys, catalog.raw_table, counts)
    else:
        # strided chunks balance the heavy early/late bursts across workers
        chunks = [starts[i::threads] for i in range(threads)]
        buf = np.zeros((threads, n, p_all), dtype=np.int64)
        totals = np.zeros(threads, dtype=np.int64)
        chunk_list = numba.typed.List([np.ascontiguousarray(c) for c in chunks])
        prev = numba.get_num_threads()
        numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
        try:
            _census_parallel(chunk_list, ev_u, ev_v, cand_ptr, cand, cfg.n_max, cfg.m_max,
                             g.directed, catalog.raw_keys, catalog.raw_table, buf, totals)
        finally:
            numba.set_num_threads(prev)
        counts = buf.sum(axis=0)
        total = int(totals.sum())
    if counts.size and counts.min() < 0:
        raise OverflowError("orbit count overflowed 64 bits")
    keep = np.flatnonzero(counts.sum(axis=0))
    dgdv = DGDVMatrix(
        counts=np.ascontiguousarray(counts[:, keep]),
        columns=[catalog.columns[j] for j in keep],
        node_labels=list(g.labels),
        occurrences=int(total),
    )
    logger.info("census: %s", census_summary(dgdv))
    return catalog, dgdv


def export_dgdv(m: DGDVMatrix, path) -> None:
    with open(path, "w") as fh:
        fh.write("\t".join(["node"] + m.column_names()) + "\n")
        for lab, row in zip(m.node_labels, m.counts):
            fh.write("\t".join([lab] + [str(int(c)) for c in row]) + "\n")


def load_dgdv(path) -> DGDVMatrix:
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split("\t")
        columns = []
        for name in header[1:]:
            t, o = name[1:].split("_o")
            columns.append((int(t), int(o)))
        labels, rows = [], []
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            labels.append(parts[0])
            rows.append([int(c) for c in parts[1:]])
    counts = np.array(rows, dtype=np.int64).reshape(len(rows), len(columns))
    return DGDVMatrix(counts, columns, labels)
