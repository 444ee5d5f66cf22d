import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from lgwalk.graph import AliasSampler, from_arcs
from lgwalk.selection import (
    AllScore,
    PrefixScore,
    RoundPlan,
    log_all_scores,
    lscore_all,
    lscore_prefix,
    run_baseline_epoch,
    run_loss_guided_epoch,
    score_candidates,
    weighted_sample_wor,
)
from lgwalk.sgns import EmbeddingModel, Trainer, init_model, pos_loss
from lgwalk.walks import Simple, draw_walks


def inclusion_oracle(weights, k):
    """Exact inclusion probabilities of sequential weighted draws without replacement."""
    w = [Fraction(x) for x in weights]
    n = len(w)
    incl = [Fraction(0)] * n
    for order in itertools.permutations(range(n), k):
        p, left = Fraction(1), sum(w)
        for i in order:
            if left == 0:
                p = Fraction(0)
                break
            p *= w[i] / left
            left -= w[i]
        for i in order:
            incl[i] += p
    return incl


def empirical_inclusion(weights, k, trials, seed):
    rng = np.random.default_rng(seed)
    hits = np.zeros(len(weights))
    for _ in range(trials):
        hits[weighted_sample_wor(weights, k, rng)] += 1
    return hits / trials


def test_oracle_reference_values():
    incl = inclusion_oracle([2, 1, 1], 2)
    assert incl == [Fraction(5, 6), Fraction(7, 12), Fraction(7, 12)]
    assert sum(incl) == 2


def test_wor_matches_reference():
    emp = empirical_inclusion([2.0, 1.0, 1.0], 2, 100_000, 0)
    np.testing.assert_allclose(emp, [5 / 6, 7 / 12, 7 / 12], atol=0.01)


@settings(max_examples=4)
@given(st.lists(st.integers(1, 20), min_size=2, max_size=6).flatmap(
    lambda w: st.tuples(st.just(w), st.integers(1, len(w)))))
def test_wor_matches_oracle(case):
    weights, k = case
    oracle = inclusion_oracle(weights, k)
    assert sum(oracle) == k
    emp = empirical_inclusion(np.array(weights, dtype=float), k, 100_000, sum(weights) * 7 + k)
    np.testing.assert_allclose(emp, [float(x) for x in oracle], atol=0.01)


def test_wor_degenerate_cases(rng):
    assert weighted_sample_wor([1.0] * 5, 5, rng).tolist() == [0, 1, 2, 3, 4]
    assert all(weighted_sample_wor([1.0, 0, 0], 1, rng).tolist() == [0] for _ in range(200))
    with pytest.raises(ValueError):
        weighted_sample_wor([1.0, 2.0], 3, rng)


def test_zero_weights_fill_uniformly():
    emp = empirical_inclusion([1.0, 0.0, 0.0, 0.0], 2, 30_000, 1)
    assert emp[0] == 1.0
    np.testing.assert_allclose(emp[1:], 1 / 3, atol=0.015)


def test_scale_equivariance():
    w = np.array([3.0, 1.0, 0.5, 2.0, 0.25])
    for scale in (0.5, 4.0):  # powers of two keep the keys bit-identical
        a = weighted_sample_wor(w, 2, np.random.default_rng(9))
        b = weighted_sample_wor(w * scale, 2, np.random.default_rng(9))
        assert a.tolist() == b.tolist()
    np.testing.assert_allclose(empirical_inclusion(w, 2, 40_000, 2), empirical_inclusion(w * 7.3, 2, 40_000, 3),
                               atol=0.015)


def _model_with_dots(dots):
    """1-d model where node 0's focus is 1 and context j holds the requested dot."""
    n = len(dots)
    focus = np.zeros((n, 1))
    focus[0] = 1.0
    return EmbeddingModel(focus, np.array(dots, dtype=float).reshape(n, 1))


def test_prefix_score_first_edge():
    m = _model_with_dots([0.0, 0.7, -1.3])
    loss = float(pos_loss(m, 0, 2))
    assert lscore_prefix(m, [0, 2, 1], 1, 3.0) == pytest.approx(loss**3, rel=1e-12)


def test_prefix_score_arithmetic():
    dot = -math.log(math.expm1(0.5))  # loss exactly 0.5
    m = _model_with_dots([0.0, dot])
    assert lscore_prefix(m, [0, 1], 1, 4.0) == pytest.approx(0.0625, rel=1e-12)


def test_all_score_two_node_walk(rng):
    m = init_model(2, 3, rng)
    m.context[:] = rng.normal(size=(2, 3))
    p = 2.0
    expected = float(pos_loss(m, 0, 1)) ** p + float(pos_loss(m, 1, 0)) ** p
    for window in (1, 4):
        assert lscore_all(m, [0, 1], window, p) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("t,window,p", [(10, 10, 1.0), (4, 2, 3.0), (2, 5, 0.5)])
def test_all_score_constant_loss(t, window, p, rng):
    m = init_model(t + 1, 4, rng)  # zero context: every loss is ln 2
    weights = sum(2 * (t + 1 - d) * (window - d + 1) / window for d in range(1, min(window, t) + 1))
    assert lscore_all(m, np.arange(t + 1), window, p) == pytest.approx(math.log(2) ** p * weights, rel=1e-12)


def test_all_score_equals_expected_pair_loss(rng):
    # Monte Carlo over skip draws agrees with the inclusion-weighted closed form
    from lgwalk.sgns import draw_skips, pairs_from_walks

    m = init_model(6, 3, rng)
    m.context[:] = rng.normal(size=(6, 3))
    walk = np.array([0, 3, 1, 5, 2, 4])
    n = 20_000
    pairs, _ = pairs_from_walks(np.tile(walk, (n, 1)), draw_skips((n, 6), 3, rng))
    mc = (pos_loss(m, pairs[:, 0], pairs[:, 1]) ** 2).sum() / n
    assert lscore_all(m, walk, 3, 2.0) == pytest.approx(mc, rel=0.02)


def test_padded_walks_score_only_real_edges(rng):
    m = init_model(4, 3, rng)
    m.context[:] = rng.normal(size=(4, 3))
    padded = np.array([[0, 1, -1, -1]])
    assert np.exp(log_all_scores(m, padded, 3, 1.0))[0] == pytest.approx(lscore_all(m, [0, 1], 3, 1.0))


def _setup(n, seed=0):
    src = list(range(n))
    dst = [(i + 1) % n for i in range(n)]
    g = from_arcs(n, src + [0], dst + [n // 2])
    rng = np.random.default_rng(seed)
    return g, AliasSampler.build(g), Trainer(n, 4, 3, 2, 10 * n, rng), rng


def test_baseline_epoch_trains_each_node_once():
    g, s, tr, rng = _setup(5)
    stats = run_baseline_epoch(g, s, Simple(), 4, tr, rng)
    assert stats.walks_trained == 5
    assert sorted(stats.starts().tolist()) == [0, 1, 2, 3, 4]


def test_single_round_with_flat_scores_is_baseline_like():
    g, s, tr, rng = _setup(12)
    stats = run_loss_guided_epoch(g, s, Simple(), 4, PrefixScore(1, 0.0), RoundPlan(1, 12), tr, rng)
    assert stats.walks_trained == 12
    assert sorted(stats.starts().tolist()) == list(range(12))


def test_round_accounting_example():
    g, s, tr, rng = _setup(20)
    stats = run_loss_guided_epoch(g, s, Simple(), 10, PrefixScore(1, 32.0), RoundPlan(10, 20), tr, rng)
    assert stats.walks_trained == 20
    assert stats.candidates_scored == 200
    assert stats.loss_evaluations == 200  # one edge per candidate


@given(n=st.integers(3, 40), rounds=st.integers(1, 12), t_prime=st.integers(1, 4),
       use_all=st.booleans())
def test_round_accounting(n, rounds, t_prime, use_all):
    if n // rounds < 1:
        with pytest.raises(ValueError):
            RoundPlan(rounds, n)
        return
    g, s, tr, rng = _setup(n, seed=n * rounds)
    score = AllScore(2.0) if use_all else PrefixScore(t_prime, 2.0)
    stats = run_loss_guided_epoch(g, s, Simple(), 4, score, RoundPlan(rounds, n), tr, rng)
    assert stats.candidates_scored == rounds * n
    assert stats.walks_trained == rounds * (n // rounds)
    assert tr.walks_done == stats.walks_trained


def test_constant_scores_select_uniformly():
    g, s, tr, rng = _setup(10)
    counts = np.zeros(10)
    for _ in range(300):
        st_ = run_loss_guided_epoch(g, s, Simple(), 2, PrefixScore(1, 0.0), RoundPlan(5, 10), tr, rng)
        counts += np.bincount(st_.starts(), minlength=10)
    assert chisquare(counts).pvalue > 1e-3


def test_high_power_prefers_high_loss_starts():
    g, s, tr, rng = _setup(10)
    tr.model.context[:] = 0.0
    tr.model.focus[:] = 1.0
    tr.model.context[:, 0] = 5.0  # every first edge has low loss ...
    tr.model.focus[3, 0] = -5.0   # ... except out of node 3
    walks, _ = draw_walks(g, s, Simple(), np.arange(10), 1, rng)
    logs, evals = score_candidates(tr.model, walks, PrefixScore(1, 32.0), 3)
    assert evals == 10
    assert int(np.argmax(logs)) == 3
