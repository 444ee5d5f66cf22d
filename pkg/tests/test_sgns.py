import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lgwalk.graph import AliasSampler, from_arcs
from lgwalk.sgns import (
    EmbeddingModel,
    NegativeTable,
    NumericError,
    Trainer,
    apply_updates,
    draw_skips,
    expected_pair_count,
    export_embeddings,
    gen_pairs,
    init_model,
    load_embeddings,
    loss_and_grad,
    lr_at,
    neg_loss_from_dot,
    pairs_from_walks,
    pos_loss,
    pos_loss_from_dot,
    record_and_sample_negatives,
)
from lgwalk.walks import simple_walks


def test_init_range(rng):
    m = init_model(50, 4, rng)
    assert np.abs(m.focus).max() <= 0.125
    assert not m.context.any()


def test_pairs_window_one():
    pairs = gen_pairs([0, 1, 2], 1, np.random.default_rng(0))
    assert sorted(map(tuple, pairs.tolist())) == [(0, 1), (1, 0), (1, 2), (2, 1)]


def test_single_node_walk_has_no_pairs(rng):
    assert gen_pairs([4], 5, rng).shape == (0, 2)


def test_padded_rows_only_use_real_nodes():
    walks = np.array([[0, 1, 2], [3, 4, -1]])
    skips = np.full(walks.shape, 5)
    pairs, owner = pairs_from_walks(walks, skips)
    assert (pairs >= 0).all()
    assert owner.tolist().count(1) == 2


@pytest.mark.parametrize("t,window", [(10, 10), (1, 1), (3, 5), (6, 2), (5, 5)])
def test_pair_count_closed_form(t, window):
    rng = np.random.default_rng(t * 31 + window)
    n = 100_000
    walks = np.tile(np.arange(t + 1), (n, 1))
    pairs, _ = pairs_from_walks(walks, draw_skips(walks.shape, window, rng))
    assert pairs.shape[0] / n == pytest.approx(expected_pair_count(t, window), rel=0.01)


def test_pair_count_brute_force_enumeration():
    # exact expectation by enumerating every skip vector on a short walk
    import itertools

    t, window = 3, 3
    total = 0
    combos = list(itertools.product(range(1, window + 1), repeat=t + 1))
    for skips in combos:
        pairs, _ = pairs_from_walks(np.arange(t + 1)[None, :], np.array(skips)[None, :])
        total += pairs.shape[0]
    assert total / len(combos) == pytest.approx(expected_pair_count(t, window), abs=1e-12)


def test_loss_values():
    assert pos_loss_from_dot(0.0) == pytest.approx(math.log(2), abs=1e-15)
    assert pos_loss_from_dot(-2.0) == pytest.approx(math.log1p(math.exp(2)), abs=1e-12)
    assert pos_loss_from_dot(-2.0) == pytest.approx(2.126928, abs=1e-6)
    assert 0 <= pos_loss_from_dot(40.0) < 1e-17
    assert neg_loss_from_dot(0.0) == pytest.approx(math.log(2))
    assert 0 <= neg_loss_from_dot(-40.0) < 1e-17
    assert np.isfinite(pos_loss_from_dot(-1e6)) and np.isfinite(neg_loss_from_dot(1e6))


def test_loss_monotonicity():
    x = np.linspace(-50, 50, 2001)
    assert np.all(np.diff(pos_loss_from_dot(x)) < 0)
    assert np.all(np.diff(neg_loss_from_dot(x)) > 0)
    assert (pos_loss_from_dot(x) >= 0).all() and (neg_loss_from_dot(x) >= 0).all()


@pytest.mark.parametrize("label", [1, 0])
def test_gradients_match_finite_differences(label):
    rng = np.random.default_rng(label)
    h = 1e-5
    for _ in range(100):
        f, c = rng.normal(size=8), rng.normal(size=8)
        _, gf, gc = loss_and_grad(f, c, label)
        for vec, grad, which in ((f, gf, 0), (c, gc, 1)):
            fd = np.empty(8)
            for a in range(8):
                up, down = vec.copy(), vec.copy()
                up[a] += h
                down[a] -= h
                args_up = (up, c) if which == 0 else (f, up)
                args_down = (down, c) if which == 0 else (f, down)
                fd[a] = (loss_and_grad(*args_up, label)[0] - loss_and_grad(*args_down, label)[0]) / (2 * h)
            assert np.linalg.norm(fd - grad) <= 1e-5 * np.linalg.norm(grad)


def test_kernel_update_is_gradient_step(rng):
    f, c = rng.normal(size=4), rng.normal(size=4)
    m = EmbeddingModel(np.array([f, np.zeros(4)]), np.array([np.zeros(4), c]))
    lr = 0.01
    apply_updates(m, np.array([[0, 1]]), np.empty((1, 0), dtype=np.int64), np.array([lr]))
    _, gf, gc = loss_and_grad(f, c, 1)
    np.testing.assert_allclose(m.focus[0], f - lr * gf, rtol=1e-12)
    np.testing.assert_allclose(m.context[1], c - lr * gc, rtol=1e-12)


def test_positive_step_raises_dot_negative_lowers(rng):
    f, c = rng.normal(size=4), rng.normal(size=4)
    m = EmbeddingModel(np.array([f, np.zeros(4)]), np.array([np.zeros(4), c]))
    before = m.dots(0, 1)
    apply_updates(m.copy(), np.array([[0, 1]]), np.empty((1, 0), dtype=np.int64), np.array([1e-3]))
    m_pos = m.copy()
    apply_updates(m_pos, np.array([[0, 1]]), np.empty((1, 0), dtype=np.int64), np.array([1e-3]))
    assert m_pos.dots(0, 1) > before
    # positive partner 0 has a zero context vector, so f_0 only moves through the negative
    m_neg = m.copy()
    apply_updates(m_neg, np.array([[0, 0]]), np.array([[1]]), np.array([1e-3]))
    assert m_neg.dots(0, 1) < before


def test_negative_frequency_power(rng):
    tbl = NegativeTable(2)
    tbl.record(np.array([0] * 8 + [1]))
    draws = tbl.sample(100_000, rng)
    expected = 8**0.75 / (8**0.75 + 1)
    assert abs((draws == 0).mean() - expected) < 0.01
    assert tbl.probabilities()[0] == pytest.approx(expected)


def test_negative_cardinality(rng):
    tbl = NegativeTable(5)
    assert record_and_sample_negatives(tbl, np.array([[1, 2]]), 0, rng).shape == (0, 2)
    negs = record_and_sample_negatives(tbl, np.array([[3, 2]]), 5, rng)
    assert negs.shape == (5, 2) and (negs[:, 0] == 3).all()


def test_empty_table_is_uniform(rng):
    tbl = NegativeTable(4)
    draws = tbl.sample(40_000, rng)
    assert np.abs(np.bincount(draws, minlength=4) / 40_000 - 0.25).max() < 0.01


def test_table_refresh_is_explicit(rng):
    tbl = NegativeTable(2)
    tbl.record(np.array([0]))
    tbl.sample(1, rng)
    tbl.record(np.array([1] * 100))
    assert (tbl.sample(1000, rng) == 0).all()  # cached distribution until refresh
    tbl.refresh()
    assert (tbl.sample(1000, rng) == 1).mean() > 0.9


def test_learning_rate_schedule():
    assert lr_at(0) == pytest.approx(0.025)
    assert lr_at(1) == pytest.approx(0.0001)
    assert lr_at(0.5) == pytest.approx(0.01255)
    with pytest.raises(ValueError):
        lr_at(1.5)


def test_divergence_raises(rng):
    m = EmbeddingModel(np.full((2, 2), 1e200), np.full((2, 2), 1e200))
    m.context[0] = 0.0
    with pytest.raises(NumericError):
        apply_updates(m, np.array([[0, 0]]), np.array([[1]]), np.array([1e200]))


def _train(g, seed, workers=1, epochs=5, dim=8):
    rng = np.random.default_rng(seed)
    s = AliasSampler.build(g)
    n = g.node_count
    tr = Trainer(n, dim, 3, 2, epochs * n, rng, workers=workers)
    for _ in range(epochs):
        tr.train(simple_walks(g, s, rng.permutation(n), 6, rng), rng)
    return tr


def _two_cliques():
    src, dst = [], []
    for base in (0, 10):
        for i in range(10):
            for j in range(i + 1, 10):
                src.append(base + i)
                dst.append(base + j)
    return from_arcs(20, src + [0], dst + [10])


def _edge_vs_nonedge(m, g):
    src, dst, _ = g.arcs()
    adj = np.zeros((g.node_count, g.node_count), dtype=bool)
    adj[src, dst] = True
    np.fill_diagonal(adj, True)
    ns, nd = np.nonzero(~adj)
    return pos_loss(m, src, dst).mean(), pos_loss(m, ns, nd).mean()


def test_training_is_deterministic(six_graph):
    a = _train(six_graph, 7)
    b = _train(six_graph, 7)
    np.testing.assert_array_equal(a.model.focus, b.model.focus)
    np.testing.assert_array_equal(a.model.context, b.model.context)


@pytest.mark.parametrize("workers", [1, 2])
def test_training_separates_edges(workers):
    g = _two_cliques()
    tr = _train(g, 3, workers=workers, epochs=30)
    edge, other = _edge_vs_nonedge(tr.model, g)
    assert edge < other
    assert tr.walks_done == 600


def test_export_roundtrip(tmp_path, rng):
    m = init_model(3, 5, rng)
    p = tmp_path / "emb.txt"
    export_embeddings(m, ["x", "y", "z"], p)
    assert p.read_text().splitlines()[0] == "3 5"
    ids, vecs = load_embeddings(p)
    assert ids == ["x", "y", "z"]
    np.testing.assert_allclose(vecs, m.focus, rtol=1e-8)


@given(st.floats(-30, 30), st.floats(-30, 30))
def test_pos_loss_vectorized_matches_scalar(a, b):
    m = EmbeddingModel(np.array([[a], [1.0]]), np.array([[1.0], [b]]))
    assert pos_loss(m, 0, 1) == pytest.approx(math.log1p(math.exp(-a * b)) if a * b > -700 else -a * b)
