import math

import numpy as np
import pytest

from privpredict.core import RandomStream
from privpredict.epw import WalkParams, opt_weighted
from privpredict.genbounds import (SourceDistribution, constant_mechanism, epw_mechanism, highprob_experiment,
                                   highprob_threshold, map_trials, mean_and_se, moment_experiment,
                                   required_sample_size, thr_expectation_experiment)


def test_highprob_threshold_examples():
    assert highprob_threshold(0.1, 0.0, 0.05) == pytest.approx(0.1)
    expected = 0.1 * math.exp(2 * math.sqrt(0.01 * math.log(20)))
    assert highprob_threshold(0.1, 0.01, 0.05) == pytest.approx(expected, abs=1e-15)
    assert highprob_threshold(0.1, 0.01, 0.05) == pytest.approx(0.14136, abs=1e-5)
    assert highprob_threshold(0.1, 0.02, 0.05) > highprob_threshold(0.1, 0.01, 0.05)
    assert highprob_threshold(0.1, 0.01, 0.01) > highprob_threshold(0.1, 0.01, 0.05)
    with pytest.raises(ValueError):
        highprob_threshold(0.1, 0.01, 1.0)


def test_required_sample_size():
    assert required_sample_size(0.2, 0.5) == 277


def test_threshold_table():
    d = SourceDistribution.threshold(4, 3, 0.2)
    assert d.table[1, 1] == pytest.approx(0.05)
    assert d.table.sum() == pytest.approx(1.0)
    assert d.opt_error(1) == pytest.approx(0.2)
    assert SourceDistribution.threshold(4, 3, 0.0).opt_error(1) == 0.0


@pytest.mark.parametrize("kwargs", [dict(N=4, a=0, eta=0.1), dict(N=4, a=6, eta=0.1), dict(N=4, a=2, eta=0.6)])
def test_threshold_table_rejects(kwargs):
    with pytest.raises(ValueError):
        SourceDistribution.threshold(**kwargs)


def test_explicit_table_validation():
    with pytest.raises(ValueError):
        SourceDistribution(2, np.array([[0.5, 0.5], [0.1, 0.0]]))
    with pytest.raises(ValueError):
        SourceDistribution(2, np.ones((3, 2)) / 6)


def test_opt_error_matches_scan():
    rng = RandomStream(3)
    table = rng.generator.random((6, 2))
    table /= table.sum()
    d = SourceDistribution(6, table)
    from privpredict.epw import enumerate_hypotheses
    for k in (1, 2, 3):
        scan = min(d.population_error(h.labels().astype(float)) for h in enumerate_hypotheses(6, k))
        assert d.opt_error(k) == pytest.approx(scan, abs=1e-12)


def test_population_error_of_constant():
    d = SourceDistribution.threshold(10, 4, 0.1)
    assert d.population_error(np.zeros(10)) == pytest.approx(d.table[:, 1].sum())


def test_mean_and_se():
    mean, se = mean_and_se([1.0, 2.0, 3.0])
    assert mean == 2.0
    assert se == pytest.approx(math.sqrt(1.0 / 3))


def test_map_trials_thread_independent():
    f = lambda t: RandomStream(1).child(t).uniform()
    assert map_trials(f, 50, 1) == map_trials(f, 50, 4)


def test_moment_constant_mechanism_control():
    d = SourceDistribution.threshold(10, 4, 0.1)
    res = moment_experiment(constant_mechanism(0.3, 10), d, 20, 1, 0.0, 2000, RandomStream(4))
    assert abs(res.lhs - res.rhs) <= 3 * res.combined_se
    assert res.passed


def test_moment_epw_examples():
    d = SourceDistribution.threshold(20, 8, 0.1)
    mech = epw_mechanism(WalkParams(10, 0.5))
    for k in (1, 2):
        res = moment_experiment(mech, d, 20, k, 0.5, 2000, RandomStream(5))
        assert res.passed


def test_moment_argument_checks():
    d = SourceDistribution.threshold(4, 2, 0.0)
    with pytest.raises(ValueError):
        moment_experiment(constant_mechanism(0.5, 4), d, 5, 0, 0.0, 200, RandomStream(0))
    with pytest.raises(ValueError):
        moment_experiment(constant_mechanism(0.5, 4), d, 5, 1, 0.0, 99, RandomStream(0))


def test_thr_expectation_small():
    d = SourceDistribution.threshold(20, 8, 0.2)
    res = thr_expectation_experiment(d, 0.2, 0.5, 200, RandomStream(1))
    assert res.n == 277 and res.passed
    assert res.opt == pytest.approx(0.2)


def test_thr_expectation_alpha_half_specialization():
    # eps = alpha/2: e^eps (opt + alpha) is about opt + alpha for small alpha
    d = SourceDistribution.threshold(10, 4, 0.1)
    res = thr_expectation_experiment(d, 0.2, 0.1, 100, RandomStream(2))
    assert res.bound == pytest.approx(math.exp(0.1) * (0.1 + 0.2))
    assert res.passed


def test_highprob_small():
    d = SourceDistribution.threshold(20, 8, 0.0)
    res = highprob_experiment(d, 0.2, 1 / (16 * math.log(10)), 0.1, 100, RandomStream(3))
    assert res.passed
