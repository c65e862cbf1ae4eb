import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from privpredict.core import LabeledPoint, RandomStream, SortedDataset
from privpredict.epw import (IntervalHypothesis, WalkParams, bernoulli_from_uniform, choose_T, empirical_error,
                             empirical_error_bound, enumerate_hypotheses, epw_bias, epw_biases, epw_predict,
                             epw_value, eval_interval_hypothesis, opt_intervals, opt_intervals_bruteforce,
                             walk_trace, walk_values, walk_values_batch)


def ds(pairs, N=None):
    N = N or max((x for x, _ in pairs), default=1)
    return SortedDataset.from_points(pairs, N)


datasets = st.integers(1, 8).flatmap(
    lambda N: st.lists(st.tuples(st.integers(1, N), st.integers(0, 1)), max_size=40).map(
        lambda pts: SortedDataset.from_points(pts, N)))


def test_interval_hypothesis_examples():
    assert eval_interval_hypothesis(IntervalHypothesis((1,), 5), 3) == 1
    h = IntervalHypothesis((2, 4), 5)
    assert eval_interval_hypothesis(h, 3) == 1
    assert eval_interval_hypothesis(h, 4) == 0
    assert eval_interval_hypothesis(IntervalHypothesis((6,), 5), 5) == 0
    assert h.labels().tolist() == [0, 1, 1, 0, 0]


@pytest.mark.parametrize("endpoints", [(), (0,), (7,), (3, 3), (4, 2)])
def test_interval_hypothesis_rejects_bad_endpoints(endpoints):
    with pytest.raises(ValueError):
        IntervalHypothesis(endpoints, 5)


def test_eval_rejects_out_of_range_query():
    with pytest.raises(ValueError):
        eval_interval_hypothesis(IntervalHypothesis((2,), 5), 6)


def test_walk_params_validation():
    with pytest.raises(ValueError):
        WalkParams(0, 1.0)
    with pytest.raises(ValueError):
        WalkParams(2, 0.0)


def test_epw_value_examples():
    assert epw_value(SortedDataset((), 4), 3, 3) == 0
    assert epw_value(ds([(1, 1), (2, 1), (3, 0)]), 2, 2) == 2
    assert epw_value(ds([(1, 1), (1, 1), (1, 1)]), 1, 2) == 2


def test_epw_bias_examples():
    assert epw_bias(SortedDataset((), 1), 1, WalkParams(3, 1.0)) == 0.5
    assert epw_bias(ds([(1, 1), (2, 1), (3, 0)]), 2, WalkParams(2, 1.0)) == pytest.approx(0.731059, abs=1e-6)
    assert epw_bias(ds([(1, 0)]), 1, WalkParams(5, 2.0)) == pytest.approx(1 / (1 + math.e), abs=1e-12)


def test_epw_predict_examples():
    assert bernoulli_from_uniform(0.731059, 0.5) == 1
    assert bernoulli_from_uniform(0.268941, 0.9) == 0
    S = ds([(1, 1), (2, 0)])
    params = WalkParams(2, 1.0)
    rng = RandomStream(3)
    draws = [epw_predict(S, 2, params, rng) for _ in range(100_000)]
    assert 0.494 <= np.mean(draws) <= 0.506


def test_choose_T_examples():
    assert choose_T(0.5, 1.0) == 3
    assert choose_T(0.1, 0.05) == 120
    # 2 ln(2/alpha) / eps == 3 exactly
    assert choose_T(2 / math.exp(0.75), 0.5) == 3
    with pytest.raises(ValueError):
        choose_T(1.0, 1.0)


def test_empirical_error_examples():
    assert empirical_error(ds([(1, 1)]), WalkParams(1, 1.0)) == pytest.approx(0.377541, abs=1e-6)
    assert empirical_error(ds([(1, 0)]), WalkParams(1, 1.0)) == pytest.approx(0.377541, abs=1e-6)
    S = ds([(x, 1) for x in range(1, 21)])
    params = WalkParams(3, 1.0)
    err = empirical_error(S, params)
    assert err <= math.exp(-1.5) + 3 / 20
    with pytest.raises(ValueError):
        empirical_error(SortedDataset((), 3), params)


def test_empirical_error_matches_monte_carlo():
    S = ds([(1, 1), (2, 0), (2, 1), (3, 1), (4, 0), (4, 0), (5, 1)])
    params = WalkParams(2, 0.7)
    rng = RandomStream(9)
    trials = 20_000
    mistakes = 0
    for p in S:
        mistakes += sum(epw_predict(S, p.x, params, rng) != p.y for _ in range(trials))
    freq = mistakes / (trials * len(S))
    se = math.sqrt(freq * (1 - freq) / (trials * len(S)))
    assert abs(freq - empirical_error(S, params)) <= 4 * se


@given(datasets, st.integers(1, 5))
def test_fast_walk_matches_literal_walk(S, T):
    fast = walk_values(S, T)
    assert fast.tolist() == [epw_value(S, x, T) for x in range(1, S.universe_size + 1)]
    zeros, ones = S.label_counts()
    assert walk_values_batch(zeros[None, :], ones[None, :], T)[0].tolist() == fast.tolist()


@given(datasets, st.integers(1, 5))
def test_walk_stays_in_band(S, T):
    assert all(-T <= v <= T for v in walk_trace(S, T))


@given(datasets, st.integers(1, 5))
def test_edge_crossings_alternate(S, T):
    # every step that crosses the edge between levels v and v+1 flips direction
    trace = walk_trace(S, T)
    crossings: dict[int, list[int]] = {}
    for before, after, p in zip(trace, trace[1:], S.points):
        if before != after:
            crossings.setdefault(min(before, after), []).append(p.y)
    for labels in crossings.values():
        assert all(a != b for a, b in zip(labels, labels[1:]))


@given(datasets, st.integers(1, 5), st.floats(0.05, 4), st.data())
def test_prefix_locality(S, T, eps, data):
    x = data.draw(st.integers(1, S.universe_size))
    extra = data.draw(st.lists(st.tuples(st.integers(1, 8), st.integers(0, 1)), max_size=10))
    right = [(x + a, y) for a, y in extra]
    bigger = SortedDataset.from_points([(p.x, p.y) for p in S] + right, S.universe_size + 8)
    params = WalkParams(T, eps)
    assert epw_bias(bigger, x, params) == epw_bias(S, x, params)


distinct_datasets = st.integers(1, 8).flatmap(
    lambda N: st.lists(st.tuples(st.integers(1, N), st.integers(0, 1)), min_size=1, max_size=40,
                       unique_by=lambda p: p[0]).map(lambda pts: SortedDataset.from_points(pts, N)))


@given(distinct_datasets, st.integers(1, 4), st.floats(0.05, 4))
def test_label_flip_symmetry(S, T, eps):
    # with ties the canonical order is not flip-invariant, so points are distinct here
    flipped = SortedDataset.from_points([(p.x, 1 - p.y) for p in S], S.universe_size)
    params = WalkParams(T, eps)
    assert epw_biases(flipped, params) == pytest.approx(1 - epw_biases(S, params), abs=1e-12)


def test_opt_intervals_examples():
    S = ds([(1, 1), (2, 1), (3, 1)])
    m, h = opt_intervals(S, 1)
    assert (m, h.endpoints) == (0, (1,))
    S = ds([(1, 0), (2, 1), (3, 0)])
    m, h = opt_intervals(S, 1)
    assert m == 1 and h.endpoints in {(2,), (4,)}
    assert h.endpoints == (2,)
    m, h = opt_intervals(S, 2)
    assert (m, h.endpoints) == (0, (2, 3))


def test_enumerate_hypotheses_counts():
    from math import comb
    for N in range(1, 6):
        for k in range(1, 4):
            assert len(list(enumerate_hypotheses(N, k))) == sum(comb(N + 1, j) for j in range(1, k + 1))


def test_opt_dp_matches_enumeration_exhaustively_small():
    from privpredict.audit import enumerate_datasets
    for N in range(1, 4):
        for n in range(0, 4):
            for S in enumerate_datasets(N, n):
                for k in (1, 2, 3):
                    m, h = opt_intervals(S, k)
                    mb, hb = opt_intervals_bruteforce(S, k)
                    assert m == mb
                    assert h.endpoints == hb.endpoints


@settings(max_examples=300)
@given(datasets, st.integers(1, 3))
def test_opt_dp_matches_enumeration(S, k):
    m, h = opt_intervals(S, k)
    mb, hb = opt_intervals_bruteforce(S, k)
    assert m == mb
    assert h.endpoints == hb.endpoints
    assert int(np.sum(h.labels()[S.xs - 1] != S.ys)) == m


@settings(max_examples=300)
@given(distinct_datasets, st.integers(1, 3), st.integers(1, 6), st.floats(0.05, 8))
def test_empirical_guarantee_distinct_points(S, k, T, eps):
    params = WalkParams(T, eps)
    assert empirical_error(S, params) <= empirical_error_bound(S, k, params) + 1e-9


def test_empirical_guarantee_can_fail_with_heavy_ties():
    # one position carrying many zeros followed by two ones: the walk ends
    # at +1 there and mislabels every zero
    S = SortedDataset.from_points([(1, 0)] * 100 + [(1, 1)] * 2, 1)
    params = WalkParams(1, 10.0)
    assert empirical_error(S, params) > 0.97
    assert empirical_error_bound(S, 1, params) < 0.06
