import numpy as np
import pytest

from tswalk import ValidationError
from tswalk.skipgram import (EmbeddingMatrix, TrainConfig, _sgns_pair, build_noise, export_embeddings,
                             init_vectors, load_embeddings, pair_count, pair_gradient, pair_objective,
                             positive_pairs, train)

A, B, C = 0, 1, 2


def toy_corpus():
    # a and b always co-occur; c shows up often but only with itself, so it serves as a negative
    return [[A, B]] * 100 + [[C] * 2000]


def test_noise_examples():
    noise = build_noise([[0] * 16 + [1] * 81])
    assert np.allclose(noise.probs, [8 / 35, 27 / 35], atol=1e-15)
    assert np.allclose(build_noise([[0, 1, 2, 3]]).probs, 0.25)
    assert build_noise([[5, 5]], num_nodes=7).probs.tolist() == [0] * 5 + [1.0, 0]
    assert abs(build_noise([[0, 1, 1, 4, 4, 4]]).probs.sum() - 1) < 1e-12
    with pytest.raises(ValidationError):
        build_noise([])


def test_noise_sampling_frequencies():
    noise = build_noise([[0] * 16 + [1] * 81 + [2] * 3 + [4] * 40], num_nodes=5)
    draws = noise.sample(np.random.default_rng(0), 1_000_000)
    freq = np.bincount(draws, minlength=5) / len(draws)
    assert np.abs(freq - noise.probs).max() < 0.01
    assert freq[3] == 0


def test_positive_pair_examples():
    assert list(positive_pairs([["a", "b"]], 10)) == [("a", "b"), ("b", "a")]
    assert list(positive_pairs([["a", "b", "c"]], 1)) == [("a", "b"), ("b", "a"), ("b", "c"), ("c", "b")]
    assert len(list(positive_pairs([list("abcde")], 2))) == 14 == pair_count(5, 2)
    for length in range(1, 12):
        for window in range(1, 6):
            assert pair_count(length, window) == len(list(positive_pairs([list(range(length))], window)))


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(0)
    h = 1e-5
    for _ in range(100):
        d, k = int(rng.integers(2, 9)), int(rng.integers(1, 6))
        w, up, un = rng.normal(size=d), rng.normal(size=d), rng.normal(size=(k, d))
        gw, gp, gn = pair_gradient(w, up, un)
        which = int(rng.integers(3))
        base = [w, up, un][which]
        analytic = [gw, gp, gn][which]
        idx = tuple(int(rng.integers(s)) for s in base.shape)
        args_p = [x.copy() for x in (w, up, un)]
        args_m = [x.copy() for x in (w, up, un)]
        args_p[which][idx] += h
        args_m[which][idx] -= h
        numeric = (pair_objective(*args_p) - pair_objective(*args_m)) / (2 * h)
        rel = abs(numeric - analytic[idx]) / max(1e-8, abs(numeric) + abs(analytic[idx]))
        assert rel < 1e-4


def test_kernel_step_is_gradient_ascent():
    rng = np.random.default_rng(1)
    d = 6
    W, U = rng.normal(size=(5, d)), rng.normal(size=(5, d))
    negs = np.array([2, 4, 3], dtype=np.int64)
    lr = 1e-3
    gw, gp, gn = pair_gradient(W[0], U[1], U[negs])
    obj = pair_objective(W[0], U[1], U[negs])
    W2, U2 = W.copy(), U.copy()
    got = _sgns_pair(W2, U2, 0, 1, negs, lr, np.empty(d))
    assert abs(got - obj) < 1e-12
    expected_u = U.copy()
    expected_u[1] += lr * gp
    for j, n in enumerate(negs):
        expected_u[n] += lr * gn[j]
    assert np.allclose(W2[0], W[0] + lr * gw, rtol=0, atol=1e-12)
    assert np.allclose(U2, expected_u, rtol=0, atol=1e-12)


def test_toy_fixture_learns_cooccurrence():
    e = train(toy_corpus(), TrainConfig(dims=8, window=2, epochs=20, seed=0))
    score = 1 / (1 + np.exp(-(e.context[B] @ e.vectors[A])))
    assert score > 0.9
    assert np.all(np.isfinite(e.vectors))


def test_objective_increases_on_toy_fixture():
    e = train(toy_corpus(), TrainConfig(dims=8, window=2, epochs=4, seed=0))
    h = e.objective
    assert h[0] < h[1] < h[2] < h[3]


def test_zero_epochs_returns_initialization():
    e = train(toy_corpus(), TrainConfig(dims=4, epochs=0, seed=7))
    W, U = init_vectors(3, 4, 7)
    assert np.array_equal(e.vectors, W) and np.array_equal(e.context, U)
    assert np.all(np.abs(W) <= 0.5 / 4) and not U.any()


def test_deterministic_single_thread():
    walks = [list(np.random.default_rng(i).integers(0, 20, size=15)) for i in range(60)]
    a = train(walks, TrainConfig(epochs=2, seed=3), 20)
    b = train(walks, TrainConfig(epochs=2, seed=3), 20)
    assert np.array_equal(a.vectors, b.vectors) and a.objective == b.objective
    c = train(walks, TrainConfig(epochs=2, seed=4), 20)
    assert not np.array_equal(a.vectors, c.vectors)


def test_parallel_training_runs():
    walks = [list(np.random.default_rng(i).integers(0, 20, size=15)) for i in range(60)]
    e = train(walks, TrainConfig(epochs=1, seed=3), 20, threads=2)
    assert e.vectors.shape == (20, 32) and np.all(np.isfinite(e.vectors))


def test_invalid_inputs():
    with pytest.raises(ValidationError):
        train([[1, 1, 1]], TrainConfig())
    for bad in [dict(dims=0), dict(window=0), dict(negatives=0), dict(epochs=-1)]:
        with pytest.raises(ValidationError):
            TrainConfig(**bad)


def test_non_finite_parameters_abort():
    with pytest.raises(FloatingPointError):
        train(toy_corpus(), TrainConfig(dims=4, epochs=2, lr=1e308, min_lr=1e308))


def test_export_round_trip(tmp_path):
    e = EmbeddingMatrix(np.random.default_rng(0).normal(size=(4, 3)))
    labels = ["x", "y", "node z", "w"][:2] + ["z", "w"]
    export_embeddings(e, tmp_path / "e.txt", labels)
    text = (tmp_path / "e.txt").read_text().splitlines()
    assert text[0] == "4 3"
    back = load_embeddings(tmp_path / "e.txt")
    assert back.labels == labels and np.array_equal(back.vectors, e.vectors)
