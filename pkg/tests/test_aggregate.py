import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from privpredict.aggregate import (agnostic_bias_from_uniform, agnostic_ensemble_bias, agnostic_params,
                                   average_predictor, constant_learner, index_partition, pac_ensemble_bias,
                                   pac_params, partition, partition_indices, threshold_erm)
from privpredict.audit import audit_sensitivity
from privpredict.core import LabeledPoint, RandomStream, log_sigmoid_bias


def test_partition_sizes():
    groups = partition(list(range(10)), 5, RandomStream(1))
    assert [len(g) for g in groups] == [2] * 5
    groups, discarded = partition_indices(11, 5, RandomStream(1))
    assert [len(g) for g in groups] == [2] * 5
    assert len(discarded) == 1


def test_partition_deterministic_for_seed():
    a = partition(list("abcdefghij"), 3, RandomStream(42))
    b = partition(list("abcdefghij"), 3, RandomStream(42))
    assert a == b


@given(st.integers(1, 60), st.integers(1, 60), st.integers(0, 2**32))
def test_partition_is_disjoint_cover(n, r, seed):
    if r > n:
        with pytest.raises(ValueError):
            partition_indices(n, r, RandomStream(seed))
        return
    groups, discarded = partition_indices(n, r, RandomStream(seed))
    everything = np.concatenate(groups + [discarded])
    assert sorted(everything.tolist()) == list(range(n))
    assert len(discarded) == n % r


def test_partition_is_uniform_over_assignments():
    # n=4, r=2: each of the 3 unordered pairings should appear about equally often
    counts = Counter()
    for t in range(3000):
        groups, _ = partition_indices(4, 2, RandomStream(7).child(t))
        counts[frozenset(frozenset(g.tolist()) for g in groups)] += 1
    assert len(counts) == 3
    assert all(abs(c - 1000) < 120 for c in counts.values())


def test_index_partition():
    assert index_partition(list(range(7)), 3) == [[0, 3], [1, 4], [2, 5]]
    with pytest.raises(ValueError):
        index_partition([1, 2], 3)


def test_pac_params_examples():
    assert pac_params(0.1, 1.0) == 23
    assert pac_params(0.2, 2.0) == 9
    a = 6 * math.log(4 / 0.3) / 0.7
    b = 6 * math.log(4 / 0.3) / 1.4
    assert b == pytest.approx(a / 2, rel=1e-15)
    with pytest.raises(ValueError):
        pac_params(0.0, 1.0)


def test_pac_ensemble_bias_examples():
    assert pac_ensemble_bias([0] * 6, 1.0) == pytest.approx(1 / (1 + math.e**3), abs=1e-12)
    assert pac_ensemble_bias([0] * 6, 1.0) == pytest.approx(0.047426, abs=1e-6)
    assert pac_ensemble_bias([1, 0, 1, 0], 0.3) == 0.5
    with pytest.raises(ValueError):
        pac_ensemble_bias([], 1.0)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=30), st.data(), st.floats(0.01, 5))
def test_single_vote_change_bounded_by_epsilon(labels, data, eps):
    i = data.draw(st.integers(0, len(labels) - 1))
    other = list(labels)
    other[i] = 1 - other[i]
    u, v = 2 * sum(labels) - len(labels), 2 * sum(other) - len(other)
    assert abs(u - v) == 2
    (pu, qu), (pv, qv) = log_sigmoid_bias(u, eps), log_sigmoid_bias(v, eps)
    assert max(abs(pu - pv), abs(qu - qv)) <= eps + 1e-12


def test_agnostic_params_examples():
    r, scale = agnostic_params(0.1, 1.0)
    assert r == 10 and scale == pytest.approx(0.1)
    r, scale = agnostic_params(0.5, 2.0)
    assert r == 1 and scale == pytest.approx(0.5)


@given(st.floats(0.01, 0.99), st.floats(0.05, 10))
def test_agnostic_noise_mean_at_most_alpha(alpha, eps):
    r, scale = agnostic_params(alpha, eps)
    assert scale <= alpha + 1e-12


def test_agnostic_bias_examples():
    assert agnostic_bias_from_uniform([1, 1, 1], 0.1, 0.5) == 1.0
    assert agnostic_bias_from_uniform([1, 0], 0.1, 0.75) == pytest.approx(0.5 + 0.1 * math.log(2), abs=1e-12)
    assert agnostic_bias_from_uniform([1, 0], 0.1, 0.75) == pytest.approx(0.569315, abs=1e-6)
    # v = 0.1 with noise -0.5 (u such that scale ln(2u) = -0.5)
    u = 0.5 * math.exp(-0.5 / 0.1)
    assert agnostic_bias_from_uniform([1] + [0] * 9, 0.1, u) == 0.0
    assert 0.0 <= agnostic_ensemble_bias([1, 0, 1], 0.3, RandomStream(2)) <= 1.0


def test_average_predictor_examples():
    S = [LabeledPoint(x, int(x >= 3)) for x in (1, 2, 3, 4, 5, 1, 2, 3)]
    base = threshold_erm(5)
    h = base(S)
    f = average_predictor(base, S, 1, RandomStream(0), subsamples=[S])
    assert [f(x) for x in range(1, 6)] == [h(x) for x in range(1, 6)]
    g = average_predictor(constant_learner(0.37), S, 4, RandomStream(0))
    assert all(g(x) == pytest.approx(0.37) for x in range(1, 6))


def test_average_predictor_stability_amplification():
    N, r = 4, 10
    rng = RandomStream(5)
    S = [LabeledPoint(int(x), int(y)) for x, y in zip(rng.integers(1, N + 1, size=20), rng.integers(0, 2, size=20))]
    pool = [LabeledPoint(x, y) for x in range(1, N + 1) for y in (0, 1)]
    base = threshold_erm(N)

    def trainer(sample):
        return average_predictor(base, sample, r, RandomStream(0), subsamples=index_partition(sample, r))

    # a bit-valued learner is trivially 1-stable, so the average should be 1/r-stable
    report = audit_sensitivity(trainer, S, list(range(1, N + 1)), 1.0 / r, pool, slack=1e-12)
    assert report.passed
    assert report.max_difference > 0
