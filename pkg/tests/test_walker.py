import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tswalk import TemporalGraph, ValidationError
from tswalk.similarity import SimilarityNetwork, build_similarity_network
from tswalk.walker import (WalkConfig, WalkCorpus, generate_corpus, sample_walk, structural_distribution,
                           temporal_distribution, walk_rng)


def csr_network(lists, n):
    """``lists``: {node: [(nbr, weight), ...]}."""
    rows = [lists.get(v, []) for v in range(n)]
    ptr = np.zeros(n + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(r) for r in rows])
    nbrs = np.array([u for r in rows for u, _ in r], dtype=np.int64)
    w = np.array([x for r in rows for _, x in r], dtype=float)
    return SimilarityNetwork(ptr, nbrs, w, max(len(r) for r in rows))


def test_temporal_distribution_examples():
    g = TemporalGraph.from_edges([("v", "a", 4)])
    _, p = temporal_distribution(g, 0, 3)
    assert p.tolist() == [1.0]
    g = TemporalGraph.from_edges([("v", "a", 4), ("v", "b", 5)])
    _, p = temporal_distribution(g, 0, 3)
    assert abs(p[0] - 1 / (1 + math.exp(-1))) < 1e-12 and abs(p[1] - 0.2689414213699951) < 1e-12
    g = TemporalGraph.from_edges([("v", "a", 4), ("v", "b", 4)])
    assert temporal_distribution(g, 0, 0)[1].tolist() == [0.5, 0.5]
    assert len(temporal_distribution(g, 0, 5)[1]) == 0


def test_structural_distribution_examples():
    s = csr_network({0: [(1, 0.5), (2, 0.5)], 1: [(0, 0.6), (2, 0.2), (3, 0.2)], 2: [(0, 0.5), (1, 1 / 3)]}, 4)
    assert structural_distribution(s, 0)[1].tolist() == [0.5, 0.5]
    assert np.allclose(structural_distribution(s, 1)[1], [0.6, 0.2, 0.2], atol=1e-15)
    assert np.allclose(structural_distribution(s, 2)[1], [0.6, 0.4], atol=1e-15)


def test_distributions_sum_to_one_on_random_states():
    rng = random.Random(0)
    checked = 0
    while checked < 1000:
        n = rng.randint(2, 9)
        edges = [(*rng.sample(range(n), 2), rng.randint(0, 40)) for _ in range(rng.randint(1, 30))]
        g = TemporalGraph.from_edges(edges, directed=rng.random() < 0.5)
        v, t = rng.randrange(g.num_nodes), rng.randint(0, 40)
        _, p = temporal_distribution(g, v, t, strict=rng.random() < 0.3)
        if len(p):
            assert abs(p.sum() - 1) <= 1e-12
            checked += 1
        if g.num_nodes > 1:
            pts = np.random.default_rng(checked).random((g.num_nodes, 3)) * 50
            s = build_similarity_network(pts, rng.randint(1, g.num_nodes - 1))
            assert abs(structural_distribution(s, v)[1].sum() - 1) <= 1e-12


def _fan_fixture():
    # the only earliest edge s->b at 0; b's later edges carry the tested distribution
    edges = [("s", "b", 0), ("b", "c1", 1), ("b", "c2", 1), ("b", "c3", 2), ("b", "c4", 3)]
    return TemporalGraph.from_edges(edges, directed=True)


def test_temporal_sampling_frequencies():
    g = _fan_fixture()
    cfg = WalkConfig(alpha=0.0, walk_length=3, num_walks=100_000, start="earliest", seed=4)
    corpus = generate_corpus(g, None, cfg)
    ids, p = temporal_distribution(g, g.index["b"], 0)
    third = np.bincount([w[2] for w in corpus.walks], minlength=g.num_nodes) / cfg.num_walks
    for e, pe in zip(ids, p):
        assert abs(third[g.dst[e]] - pe) < 0.01


def test_structural_sampling_frequencies():
    g = _fan_fixture()
    b = g.index["b"]
    s = csr_network({v: [((v + 1) % g.num_nodes, 1.0)] for v in range(g.num_nodes)} |
                    {b: [(2, 0.5), (3, 1 / 3), (4, 0.2), (5, 0.9)]}, g.num_nodes)
    cfg = WalkConfig(alpha=1.0, walk_length=3, num_walks=100_000, start="earliest", seed=9)
    corpus = generate_corpus(g, s, cfg)
    third = np.bincount([w[2] for w in corpus.walks], minlength=g.num_nodes) / cfg.num_walks
    nbrs, p = structural_distribution(s, b)
    for u, pu in zip(nbrs, p):
        assert abs(third[u] - pu) < 0.01
    assert corpus.temporal_steps == 0
    assert all(t == [0, 0, 0] for t in corpus.times)


def _always_open_fixture():
    # every node has edges at the single timestep, so the temporal branch never runs dry
    edges = [(a, b, 0) for a in range(6) for b in range(a + 1, 6)]
    g = TemporalGraph.from_edges(edges)
    s = build_similarity_network(np.random.default_rng(0).random((6, 2)), 3)
    return g, s


@pytest.mark.parametrize("alpha", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_structural_fraction_matches_alpha(alpha):
    g, s = _always_open_fixture()
    c = generate_corpus(g, s, WalkConfig(alpha, walk_length=102, num_walks=1000, seed=1))
    steps = c.temporal_steps + c.structural_steps
    assert steps == 100_000 and c.early_terminations == 0
    assert abs(c.structural_steps / steps - alpha) < 0.01
    if alpha == 0:
        assert c.structural_steps == 0


def reference_temporal_walk(edges, directed, length, rng):
    """Plain temporal walk over a raw edge list, drawing from ``rng`` in the same order."""
    m = len(edges)
    u, v, t = edges[int(rng.integers(m))]
    if not directed and rng.random() < 0.5:
        u, v = v, u
    walk = [u, v]
    while len(walk) < length:
        cand = []
        for eid, (a, b, te) in enumerate(edges):
            if te < t:
                continue
            if a == v:
                cand.append((te, b, eid))
            elif b == v and not directed:
                cand.append((te, a, eid))
        if not cand:
            break
        cand.sort()
        w = np.cumsum(np.exp(cand[0][0] - np.array([c[0] for c in cand], dtype=float)))
        j = min(int(np.searchsorted(w, rng.random() * w[-1], side="right")), len(cand) - 1)
        t, v = cand[j][0], cand[j][1]
        walk.append(v)
    return walk


def test_alpha_zero_equals_reference_temporal_walk():
    rng = random.Random(2)
    for trial in range(20):
        n = rng.randint(3, 8)
        edges = [(*rng.sample(range(n), 2), rng.randint(0, 6)) for _ in range(rng.randint(2, 20))]
        directed = trial % 2 == 0
        g = TemporalGraph.from_edges([(f"{a}", f"{b}", t) for a, b, t in edges], directed=directed)
        ids = [(g.index[f"{a}"], g.index[f"{b}"], t) for a, b, t in edges]
        cfg = WalkConfig(0.0, walk_length=12, num_walks=30, seed=trial)
        corpus = generate_corpus(g, None, cfg)
        for i, w in enumerate(corpus.walks):
            assert w == reference_temporal_walk(ids, directed, 12, walk_rng(cfg.seed, i))


def test_chain_is_deterministic():
    g = TemporalGraph.from_edges([("a", "b", 1), ("b", "c", 2), ("c", "d", 3)], directed=True)
    cfg = WalkConfig(0.0, walk_length=4, num_walks=10, start="earliest")
    for seed in range(5):
        walk = sample_walk(g, None, cfg, np.random.default_rng(seed))
        assert [g.labels[v] for v in walk] == ["a", "b", "c", "d"]
    c = generate_corpus(g, None, cfg)
    assert len(c) == 10 and all([g.labels[v] for v in w] == ["a", "b", "c", "d"] for w in c.walks)


def test_empty_corpus_and_errors():
    g = TemporalGraph.from_edges([("a", "b", 1)])
    assert len(generate_corpus(g, None, WalkConfig(num_walks=0))) == 0
    with pytest.raises(ValidationError):
        generate_corpus(TemporalGraph.from_edges([]), None, WalkConfig())
    with pytest.raises(ValidationError):
        generate_corpus(g, None, WalkConfig(alpha=0.5))
    for bad in [dict(alpha=1.5), dict(walk_length=1), dict(start="middle")]:
        with pytest.raises(ValidationError):
            WalkConfig(**bad)


def test_alpha_zero_dead_end_terminates():
    g = TemporalGraph.from_edges([("a", "b", 1), ("c", "d", 0)], directed=True)
    s = build_similarity_network(np.arange(4.0), 1)
    c = generate_corpus(g, s, WalkConfig(0.0, walk_length=5, num_walks=50))
    assert all(len(w) == 2 for w in c.walks) and c.early_terminations == 50
    # with alpha = 1 the structural branch keeps the walk going
    c = generate_corpus(g, s, WalkConfig(1.0, walk_length=5, num_walks=50))
    assert all(len(w) == 5 for w in c.walks)


def test_threads_match_serial():
    g, s = _always_open_fixture()
    cfg = WalkConfig(0.3, walk_length=8, num_walks=40, seed=3)
    a, b = generate_corpus(g, s, cfg), generate_corpus(g, s, cfg, threads=2)
    assert a.walks == b.walks and a.times == b.times
    assert (a.temporal_steps, a.structural_steps) == (b.temporal_steps, b.structural_steps)


def test_dump_load(tmp_path):
    g, s = _always_open_fixture()
    c = generate_corpus(g, s, WalkConfig(0.5, walk_length=6, num_walks=20))
    c.dump(tmp_path / "w.txt", g.labels)
    back = WalkCorpus.load(tmp_path / "w.txt", g.labels)
    assert back.walks == c.walks
    assert (back.temporal_steps, back.structural_steps, back.early_terminations) == \
        (c.temporal_steps, c.structural_steps, c.early_terminations)


graphs = st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6), st.integers(0, 8)).filter(lambda e: e[0] != e[1]),
                  min_size=1, max_size=20)


@given(graphs, st.floats(0, 1), st.booleans(), st.booleans(), st.integers(0, 1000))
@settings(max_examples=60, deadline=None)
def test_walk_invariants(edges, alpha, directed, strict, seed):
    g = TemporalGraph.from_edges(edges, directed=directed)
    s = build_similarity_network(np.random.default_rng(seed).random((g.num_nodes, 2)), 1) \
        if g.num_nodes > 1 else None
    cfg = WalkConfig(alpha, walk_length=7, num_walks=15, strict_time=strict, seed=seed)
    c = generate_corpus(g, s, cfg)
    arcs = {}
    for a, b, t in zip(g.src, g.dst, g.t):
        arcs.setdefault((int(a), int(b)), set()).add(int(t))
        if not directed:
            arcs.setdefault((int(b), int(a)), set()).add(int(t))
    for w, ts in zip(c.walks, c.times):
        assert 2 <= len(w) <= 7
        assert ts[0] in arcs[(w[0], w[1])] and ts[1] == ts[0]
        for i in range(1, len(w) - 1):
            x, y, t0, t1 = w[i], w[i + 1], ts[i], ts[i + 1]
            temporal = t1 in arcs.get((x, y), ()) and (t1 > t0 if strict else t1 >= t0)
            structural = t1 == t0 and s is not None and y in s.as_dict(x)
            assert temporal or structural
    assert sum(len(w) - 1 for w in c.walks) == len(c) + c.temporal_steps + c.structural_steps
    if alpha == 0:
        assert c.structural_steps == 0
