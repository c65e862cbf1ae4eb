"""Subsample-and-aggregate private prediction.

Train a non-private learner on disjoint subsamples, then answer each query
with a soft-majority vote (realizable case) or a Laplace-noised average
(agnostic case). :func:`average_predictor` is the generic stability
amplifier behind the latter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from .core import RandomStream, SortedDataset, ceil_formula, laplace_quantile, sigmoid_bias
from .epw import IntervalHypothesis, opt_intervals

Predictor = Callable[[Any], float]
# train(sample, rng) -> predictor
BaseLearner = Callable[[Sequence, RandomStream], Predictor]


@dataclass(frozen=True)
class Ensemble:
    predictors: tuple

    def __post_init__(self):
        if len(self.predictors) < 1:
            raise ValueError("an ensemble needs at least one predictor")

    @property
    def r(self) -> int:
        return len(self.predictors)

    def outputs(self, x) -> list[float]:
        return [f(x) for f in self.predictors]

    def mean(self, x) -> float:
        return math.fsum(self.outputs(x)) / self.r


def partition_indices(n: int, r: int, rng: RandomStream) -> tuple[list[np.ndarray], np.ndarray]:
    """Uniformly random split of ``range(n)`` into ``r`` groups of ``n // r``.

    Returns ``(groups, discarded)``; the surplus ``n mod r`` indices are discarded.
    """
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    if r > n:
        raise ValueError(f"cannot split {n} examples into {r} nonempty subsamples")
    perm = rng.permutation(n)
    m = n // r
    groups = [np.sort(perm[j * m:(j + 1) * m]) for j in range(r)]
    return groups, np.sort(perm[r * m:])


def partition(S: Sequence, r: int, rng: RandomStream) -> list[list]:
    items = list(S)
    groups, _ = partition_indices(len(items), r, rng)
    return [[items[i] for i in g] for g in groups]


def index_partition(S: Sequence, r: int) -> list[list]:
    """Deterministic split: example ``i`` goes to subsample ``i mod r`` (surplus discarded).

    A replace-one change then touches exactly one subsample.
    """
    items = list(S)
    if r < 1 or r > len(items):
        raise ValueError(f"cannot split {len(items)} examples into {r} nonempty subsamples")
    used = (len(items) // r) * r
    return [items[j:used:r] for j in range(r)]


def train_ensemble(learner: BaseLearner, subsamples: Sequence[Sequence], rng: RandomStream) -> Ensemble:
    return Ensemble(tuple(learner(sub, rng.child(j)) for j, sub in enumerate(subsamples)))


def pac_params(alpha: float, epsilon: float) -> int:
    """Number of subsamples ``ceil(6 ln(4/alpha) / eps)`` for the soft-majority vote."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    return ceil_formula(6.0 * math.log(4.0 / alpha) / epsilon)


def vote_value(labels: Sequence[int]) -> int:
    labels = list(labels)
    if not labels:
        raise ValueError("labels must be nonempty")
    return 2 * sum(int(b) for b in labels) - len(labels)


def pac_ensemble_bias(labels: Sequence[int], epsilon: float) -> float:
    """Soft-majority probability of answering 1 given the ensemble's votes."""
    return sigmoid_bias(vote_value(labels), epsilon)


def pac_predict(ensemble: Ensemble, x, epsilon: float, rng: RandomStream) -> int:
    labels = [int(f(x)) for f in ensemble.predictors]
    return int(rng.uniform() < pac_ensemble_bias(labels, epsilon))


def agnostic_params(alpha: float, epsilon: float) -> tuple[int, float]:
    """``r = ceil(1/(alpha eps))`` subsamples and Laplace scale ``1/(r eps)`` for the average."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    r = ceil_formula(1.0 / (alpha * epsilon))
    return r, 1.0 / (r * epsilon)


def agnostic_bias_from_uniform(labels: Sequence[float], noise_scale: float, u: float) -> float:
    labels = list(labels)
    if not labels:
        raise ValueError("labels must be nonempty")
    v = math.fsum(labels) / len(labels)
    return min(1.0, max(0.0, v + laplace_quantile(noise_scale, u)))


def agnostic_ensemble_bias(labels: Sequence[float], noise_scale: float, rng: RandomStream) -> float:
    """Mean vote plus Laplace noise, truncated to ``[0, 1]``."""
    return agnostic_bias_from_uniform(labels, noise_scale, rng.uniform())


def average_predictor(base: BaseLearner, S: Sequence, r: int, rng: RandomStream,
                      subsamples: Sequence[Sequence] | None = None) -> Predictor:
    """Average of ``r`` models trained on disjoint subsamples of ``S``.

    ``subsamples`` overrides the random split (e.g. with :func:`index_partition`).
    """
    if subsamples is None:
        subsamples = partition(S, r, rng.child(0))
    ensemble = train_ensemble(base, subsamples, rng.child(1))
    if ensemble.r == 1:
        return ensemble.predictors[0]
    return ensemble.mean


def threshold_erm(universe_size: int, k: int = 1) -> BaseLearner:
    """Exact empirical risk minimizer over ``Thr_{N,k}`` as a base learner."""

    def train(sample, rng=None) -> IntervalHypothesis:
        S = SortedDataset.from_points(sample, universe_size)
        _, h = opt_intervals(S, k)
        return h

    return train


def constant_learner(c: float) -> BaseLearner:
    def train(sample, rng=None):
        return lambda x: c

    return train
