"""Exponential projected walk over thresholds and unions of intervals.

The walk takes a ``+1`` step for every label-1 example and a ``-1`` step for
every label-0 example left of (or at) the query, clamped to ``[-T, T]``, and
predicts 1 with probability ``sigmoid(eps * v / 2)`` of the final value.
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import RandomStream, SortedDataset, ceil_formula, sigmoid_bias


@dataclass(frozen=True)
class WalkParams:
    T: int
    epsilon: float

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 1:
            raise ValueError(f"T must be a positive integer, got {self.T}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class IntervalHypothesis:
    """Union of intervals given by endpoints ``1 <= a_1 < ... < a_k <= N + 1``.

    ``h(x) = 1`` iff the number of endpoints ``<= x`` is odd.
    """

    endpoints: tuple[int, ...]
    universe_size: int

    def __post_init__(self):
        a = self.endpoints
        if len(a) < 1:
            raise ValueError("need at least one endpoint")
        if a[0] < 1 or a[-1] > self.universe_size + 1:
            raise ValueError(f"endpoints {a} outside [1, {self.universe_size + 1}]")
        if any(p >= q for p, q in zip(a, a[1:])):
            raise ValueError(f"endpoints {a} are not strictly increasing")

    def __call__(self, x: int) -> int:
        return eval_interval_hypothesis(self, x)

    def labels(self) -> np.ndarray:
        """Labels for every ``x`` in ``[1, N]`` as an int array."""
        xs = np.arange(1, self.universe_size + 1)
        return (np.searchsorted(np.asarray(self.endpoints), xs, side="right") % 2).astype(np.int64)


def eval_interval_hypothesis(h: IntervalHypothesis, x: int) -> int:
    if not 1 <= x <= h.universe_size:
        raise ValueError(f"x={x} outside [1, {h.universe_size}]")
    return bisect.bisect_right(h.endpoints, x) % 2


def walk_values_from_counts(zeros: Sequence[int], ones: Sequence[int], T: int) -> np.ndarray:
    """Final walk value for every query ``x = 1..N``.

    Canonical order puts the zeros at a position before its ones, so a run of
    equal-sign clamped steps collapses to one saturating update.
    """
    out = np.empty(len(zeros), dtype=np.int64)
    v = 0
    for i, (c0, c1) in enumerate(zip(zeros, ones)):
        if c0:
            v = max(v - int(c0), -T)
        if c1:
            v = min(v + int(c1), T)
        out[i] = v
    return out


def walk_values_batch(zeros: np.ndarray, ones: np.ndarray, T: int) -> np.ndarray:
    """Vectorized :func:`walk_values_from_counts` over rows of count matrices."""
    zeros = np.asarray(zeros)
    ones = np.asarray(ones)
    out = np.empty(zeros.shape, dtype=np.int64)
    v = np.zeros(zeros.shape[0], dtype=np.int64)
    for j in range(zeros.shape[1]):
        v = np.maximum(v - zeros[:, j], -T)
        v = np.minimum(v + ones[:, j], T)
        out[:, j] = v
    return out


def walk_values(S: SortedDataset, T: int) -> np.ndarray:
    """``V(S, x)`` for ``x = 1..N`` (index ``x - 1``)."""
    zeros, ones = S.label_counts()
    return walk_values_from_counts(zeros, ones, T)


def walk_trace(S: SortedDataset, T: int) -> list[int]:
    """Step-by-step walk ``v_0 = 0, v_1, ..., v_n`` over all examples in order."""
    trace = [0]
    v = 0
    for p in S.points:
        v = min(max(v + 2 * p.y - 1, -T), T)
        trace.append(v)
    return trace


def epw_value(S: SortedDataset, x: int, T: int) -> int:
    """Walk value after every example with ``x_i <= x`` has been consumed."""
    v = 0
    for p in S.points:
        if p.x > x:
            break
        v = min(max(v + 2 * p.y - 1, -T), T)
    return v


def epw_bias(S: SortedDataset, x: int, params: WalkParams) -> float:
    return sigmoid_bias(epw_value(S, x, params.T), params.epsilon)


def epw_biases(S: SortedDataset, params: WalkParams) -> np.ndarray:
    """Bias of the predictor at every ``x = 1..N``."""
    return sigmoid_bias(walk_values(S, params.T), params.epsilon)


def bernoulli_from_uniform(bias: float, u: float) -> int:
    return int(u < bias)


def epw_predict(S: SortedDataset, x: int, params: WalkParams, rng: RandomStream) -> int:
    return bernoulli_from_uniform(epw_bias(S, x, params), rng.uniform())


def choose_T(alpha: float, epsilon: float) -> int:
    """``ceil(2 ln(2/alpha) / eps)``, the walk bound balancing both error terms."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    return ceil_formula(2.0 * math.log(2.0 / alpha) / epsilon)


def empirical_error(S: SortedDataset, params: WalkParams) -> float:
    """Expected disagreement of the walk with its own training labels."""
    if len(S) == 0:
        raise ValueError("empirical error of an empty dataset is undefined")
    zeros, ones = S.label_counts()
    p = sigmoid_bias(walk_values_from_counts(zeros, ones, params.T), params.epsilon)
    return math.fsum(zeros * p) / len(S) + math.fsum(ones * (1.0 - p)) / len(S)


def empirical_error_bound(S: SortedDataset, k: int, params: WalkParams) -> float:
    """Right-hand side ``opt_S/n + (k+2)T/n + e^{-eps T/2}`` of the empirical guarantee."""
    n = len(S)
    mistakes, _ = opt_intervals(S, k)
    return mistakes / n + (k + 2) * params.T / n + math.exp(-params.epsilon * params.T / 2)


def _opt_tables(cost0: np.ndarray, cost1: np.ndarray, k: int) -> np.ndarray:
    """Cost-to-go ``g[x, j]``: best cost on positions ``x..N-1`` with ``j`` endpoints so far.

    ``cost0[x]`` is the cost of labeling position ``x`` with 0 (i.e. the
    weight of label-1 examples there) and ``cost1`` symmetrically.
    """
    N = len(cost0)
    g = np.zeros((N + 1, k + 1))
    for x in range(N - 1, -1, -1):
        for j in range(k + 1):
            stay = (cost1[x] if j % 2 else cost0[x]) + g[x + 1, j]
            if j < k:
                flip = (cost0[x] if j % 2 else cost1[x]) + g[x + 1, j + 1]
                g[x, j] = min(stay, flip)
            else:
                g[x, j] = stay
    return g


def opt_weighted(cost0: Sequence[float], cost1: Sequence[float], k: int) -> tuple[float, tuple[int, ...]]:
    """Minimum-cost labeling in ``Thr_{N,k}`` and the lexicographically smallest argmin.

    The class holds every hypothesis with between 1 and ``k`` endpoints; the
    constant-0 function is represented by the single endpoint ``N + 1``.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    cost0 = np.asarray(cost0, dtype=float)
    cost1 = np.asarray(cost1, dtype=float)
    N = len(cost0)
    g = _opt_tables(cost0, cost1, k)
    # suffix costs of never flipping again, per parity
    tail0 = np.concatenate([np.cumsum(cost0[::-1])[::-1], [0.0]])
    tail1 = np.concatenate([np.cumsum(cost1[::-1])[::-1], [0.0]])
    best = g[0, 0]
    tol = 1e-9 * max(1.0, abs(best))

    endpoints: list[int] = []
    j = 0
    for x in range(N):
        # ending the sequence now is a prefix, hence lexicographically smallest
        if j >= 1 and (tail1 if j % 2 else tail0)[x] <= g[x, j] + tol:
            break
        if j < k:
            flip = (cost0[x] if j % 2 else cost1[x]) + g[x + 1, j + 1]
            if flip <= g[x, j] + tol:
                endpoints.append(x + 1)
                j += 1
    if not endpoints:
        endpoints = [N + 1]
    return float(best), tuple(endpoints)


def opt_intervals(S: SortedDataset, k: int) -> tuple[int, IntervalHypothesis]:
    """Fewest mistakes on ``S`` achievable in ``Thr_{N,k}``, with a minimizer."""
    zeros, ones = S.label_counts()
    mistakes, endpoints = opt_weighted(ones, zeros, k)
    return int(round(mistakes)), IntervalHypothesis(endpoints, S.universe_size)


def enumerate_hypotheses(N: int, k: int):
    """Every hypothesis in ``Thr_{N,k}`` (1 to ``k`` endpoints), in lexicographic order."""
    cands = []
    for size in range(1, k + 1):
        cands.extend(itertools.combinations(range(1, N + 2), size))
    for endpoints in sorted(cands):
        yield IntervalHypothesis(endpoints, N)


def opt_intervals_bruteforce(S: SortedDataset, k: int) -> tuple[int, IntervalHypothesis]:
    """Exhaustive scan of :func:`enumerate_hypotheses`; oracle for :func:`opt_intervals`."""
    xs, ys = S.xs, S.ys
    best = None
    for h in enumerate_hypotheses(S.universe_size, k):
        m = int(np.sum(h.labels()[xs - 1] != ys)) if len(S) else 0
        if best is None or m < best[0]:
            best = (m, h)
    return best
