"""Monte-Carlo checks of the generalization guarantees of private prediction.

Every trial draws its randomness from ``rng.child(trial)`` and trial results
are reduced with :func:`math.fsum`, so outcomes do not depend on how many
worker threads ran them.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import LabeledPoint, RandomStream, SortedDataset, ceil_formula, sigmoid_bias
from .epw import WalkParams, choose_T, opt_weighted, walk_values_batch

Mechanism = Callable[[SortedDataset], np.ndarray]


def default_threads() -> int:
    env = os.environ.get("PRIVPREDICT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def map_trials(fn: Callable[[int], object], trials: int, threads: int | None = None) -> list:
    """``[fn(0), ..., fn(trials - 1)]``, optionally evaluated on a thread pool."""
    threads = default_threads() if threads is None else threads
    if threads <= 1 or trials <= 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(trials)))


def mean_and_se(values: Sequence[float]) -> tuple[float, float]:
    """Sample mean and its standard error, both reduced with exact summation."""
    values = [float(v) for v in values]
    m = len(values)
    mean = math.fsum(values) / m
    if m < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (m - 1)
    return mean, math.sqrt(var / m)


@dataclass(frozen=True)
class SourceDistribution:
    """Distribution over ``[N] x {0, 1}`` given by an explicit probability table.

    ``table[x - 1, y]`` is ``P(x, y)``.
    """

    universe_size: int
    table: np.ndarray
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.shape != (self.universe_size, 2):
            raise ValueError(f"table must have shape ({self.universe_size}, 2), got {t.shape}")
        if np.any(t < 0) or abs(t.sum() - 1.0) > 1e-12:
            raise ValueError("table must be nonnegative and sum to 1")
        object.__setattr__(self, "table", t)

    @classmethod
    def threshold(cls, N: int, a: int, eta: float, marginal: Sequence[float] | None = None) -> "SourceDistribution":
        """Labels from ``x >= a`` flipped with probability ``eta``; ``x`` uniform unless ``marginal`` given."""
        if not 1 <= a <= N + 1:
            raise ValueError(f"threshold a={a} outside [1, {N + 1}]")
        if not 0 <= eta <= 0.5:
            raise ValueError(f"eta must be in [0, 1/2], got {eta}")
        px = np.full(N, 1.0 / N) if marginal is None else np.asarray(marginal, dtype=float)
        clean = (np.arange(1, N + 1) >= a).astype(int)
        table = np.empty((N, 2))
        table[:, 1] = px * np.where(clean == 1, 1 - eta, eta)
        table[:, 0] = px * np.where(clean == 1, eta, 1 - eta)
        return cls(N, table, {"kind": "threshold", "a": a, "eta": eta})

    @property
    def marginal(self) -> np.ndarray:
        return self.table.sum(axis=1)

    def draw(self, rng: RandomStream) -> LabeledPoint:
        idx = int(rng.choice(2 * self.universe_size, p=self.table.ravel()))
        return LabeledPoint(idx // 2 + 1, idx % 2)

    def sample_counts(self, n: int, rng: RandomStream) -> tuple[np.ndarray, np.ndarray]:
        """Per-position label counts of an i.i.d. sample of size ``n``."""
        idx = rng.choice(2 * self.universe_size, size=n, p=self.table.ravel())
        counts = np.bincount(idx, minlength=2 * self.universe_size).reshape(self.universe_size, 2)
        return counts[:, 0], counts[:, 1]

    def sample(self, n: int, rng: RandomStream) -> SortedDataset:
        zeros, ones = self.sample_counts(n, rng)
        return SortedDataset.from_counts(zeros, ones)

    def population_error(self, biases: np.ndarray) -> float:
        """Exact disagreement probability of a predictor answering 1 w.p. ``biases[x-1]``."""
        return math.fsum(self.table[:, 1] * (1.0 - biases)) + math.fsum(self.table[:, 0] * biases)

    def opt_error(self, k: int = 1) -> float:
        """``min`` over ``Thr_{N,k}`` of the population error."""
        value, _ = opt_weighted(self.table[:, 1], self.table[:, 0], k)
        return value


def empirical_disagreement(zeros: np.ndarray, ones: np.ndarray, biases: np.ndarray) -> float:
    n = int(zeros.sum() + ones.sum())
    return (math.fsum(zeros * biases) + math.fsum(ones * (1.0 - biases))) / n


def epw_mechanism(params: WalkParams) -> Mechanism:
    def mech(S: SortedDataset) -> np.ndarray:
        zeros, ones = S.label_counts()
        return sigmoid_bias(walk_values_batch(zeros[None, :], ones[None, :], params.T)[0], params.epsilon)

    return mech


def constant_mechanism(p: float, N: int) -> Mechanism:
    return lambda S: np.full(N, p)


@dataclass
class MomentResult:
    k: int
    epsilon: float
    lhs: float
    rhs: float
    lhs_se: float
    rhs_se: float
    factor: float
    trials: int

    @property
    def combined_se(self) -> float:
        return math.sqrt(self.lhs_se**2 + (self.factor * self.rhs_se) ** 2)

    @property
    def bound(self) -> float:
        return self.factor * self.rhs

    @property
    def passed(self) -> bool:
        return self.lhs <= self.bound + 3.0 * self.combined_se


def moment_experiment(mechanism: Mechanism, dist: SourceDistribution, n: int, k: int, epsilon: float,
                      trials: int, rng: RandomStream, delta: float = 0.0, bound_B: float = 1.0,
                      threads: int | None = None) -> MomentResult:
    """Estimate both sides of ``E[(fresh loss)^k] <= e^{k^2 eps} E[(empirical loss + k delta B)^k]``.

    For ``k = 1`` the fresh-sample loss is replaced by its exact expectation
    (the population error); for ``k >= 2`` a fresh sample ``S'`` is drawn.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if trials < 100:
        raise ValueError(f"need at least 100 trials, got {trials}")

    def one(t: int) -> tuple[float, float]:
        stream = rng.child(t)
        zeros, ones = dist.sample_counts(n, stream.child(0))
        p = mechanism(SortedDataset.from_counts(zeros, ones))
        emp = empirical_disagreement(zeros, ones, p)
        if k == 1:
            fresh = dist.population_error(p)
        else:
            z2, o2 = dist.sample_counts(n, stream.child(1))
            fresh = empirical_disagreement(z2, o2, p)
        return fresh**k, (emp + k * delta * bound_B) ** k

    results = map_trials(one, trials, threads)
    lhs, lhs_se = mean_and_se([a for a, _ in results])
    rhs, rhs_se = mean_and_se([b for _, b in results])
    return MomentResult(k, epsilon, lhs, rhs, lhs_se, rhs_se, math.exp(k * k * epsilon), trials)


def highprob_threshold(alpha: float, epsilon: float, beta: float) -> float:
    """Level ``alpha e^{2 sqrt(eps ln(1/beta))}`` exceeded with probability at most ``beta``."""
    if not 0 < beta < 1:
        raise ValueError(f"beta must be in (0, 1), got {beta}")
    if epsilon < 0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    return alpha * math.exp(2.0 * math.sqrt(epsilon * math.log(1.0 / beta)))


def required_sample_size(alpha: float, epsilon: float, k: int = 1) -> int:
    """Smallest ``n >= 4 (k+2) ln(2/alpha) / (alpha eps)``."""
    return ceil_formula(4.0 * (k + 2) * math.log(2.0 / alpha) / (alpha * epsilon))


def _population_errors(dist: SourceDistribution, params: WalkParams, n: int, trials: int,
                       rng: RandomStream, threads: int | None, batch: int = 64) -> list[float]:
    """Exact population error of the walk trained on each of ``trials`` samples."""
    n_batches = (trials + batch - 1) // batch

    def run(b: int) -> list[float]:
        ids = range(b * batch, min(trials, (b + 1) * batch))
        counts = [dist.sample_counts(n, rng.child(t)) for t in ids]
        zeros = np.array([c[0] for c in counts])
        ones = np.array([c[1] for c in counts])
        p = sigmoid_bias(walk_values_batch(zeros, ones, params.T), params.epsilon)
        return [dist.population_error(row) for row in p]

    out: list[float] = []
    for chunk in map_trials(run, n_batches, threads):
        out.extend(chunk)
    return out


@dataclass
class ExpectationResult:
    mean_population_error: float
    se: float
    bound: float
    opt: float
    n: int
    T: int
    trials: int

    @property
    def passed(self) -> bool:
        return self.mean_population_error <= self.bound + 3.0 * self.se


def thr_expectation_experiment(dist: SourceDistribution, alpha: float, epsilon: float, trials: int,
                               rng: RandomStream, k: int = 1, n: int | None = None,
                               threads: int | None = None) -> ExpectationResult:
    """Mean exact population error of the walk against ``e^eps (opt_P + alpha)``."""
    T = choose_T(alpha, epsilon)
    n = required_sample_size(alpha, epsilon, k) if n is None else n
    errs = _population_errors(dist, WalkParams(T, epsilon), n, trials, rng, threads)
    mean, se = mean_and_se(errs)
    opt = dist.opt_error(k)
    return ExpectationResult(mean, se, math.exp(epsilon) * (opt + alpha), opt, n, T, trials)


@dataclass
class HighProbResult:
    fraction: float
    se: float
    bound: float
    max_error: float
    n: int
    T: int
    trials: int

    @property
    def passed(self) -> bool:
        return self.fraction <= self.bound + 3.0 * self.se


def highprob_experiment(dist: SourceDistribution, alpha: float, epsilon: float, beta: float, trials: int,
                        rng: RandomStream, k: int = 1, n: int | None = None,
                        threads: int | None = None) -> HighProbResult:
    """Fraction of samples on which the walk's population error reaches ``3 alpha``."""
    T = choose_T(alpha, epsilon)
    n = required_sample_size(alpha, epsilon, k) if n is None else n
    errs = _population_errors(dist, WalkParams(T, epsilon), n, trials, rng, threads)
    hits = [1.0 if e >= 3 * alpha else 0.0 for e in errs]
    frac, se = mean_and_se(hits)
    return HighProbResult(frac, se, 2 * beta, max(errs), n, T, trials)
