"""Exact differential-privacy audits for Bernoulli-output prediction mechanisms.

Audits enumerate neighboring datasets exhaustively and compare output
distributions in log space; nothing here samples.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Sequence

import numpy as np

from .core import LabeledPoint, SortedDataset, log_sigmoid_bias
from .epw import WalkParams, epw_bias, walk_values_from_counts

DEFAULT_MAX_N = 6
DEFAULT_MAX_SIZE = 7


@dataclass
class AuditReport:
    """Worst observed max-divergence and the neighbor pair that attains it.

    ``witness`` is ``(dataset, neighbor, query, outcome)``; for Bernoulli
    outputs the outcome is the event (0 or 1) whose log-ratio is largest.
    """

    worst_epsilon: float
    witness: tuple | None
    mechanisms_checked: int
    bound: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.bound is None or self.worst_epsilon <= self.bound + 1e-9

    def to_json(self) -> dict:
        def enc(obj):
            if isinstance(obj, SortedDataset):
                return {"universe_size": obj.universe_size, "points": [[p.x, p.y] for p in obj.points]}
            if isinstance(obj, (tuple, list)):
                return [enc(o) for o in obj]
            if isinstance(obj, LabeledPoint):
                return [obj.x, obj.y]
            if isinstance(obj, (np.integer,)):
                return int(obj)
            if isinstance(obj, (np.floating,)):
                return float(obj)
            return obj

        return {
            "worst_epsilon": self.worst_epsilon,
            "bound": self.bound,
            "passed": self.passed,
            "mechanisms_checked": self.mechanisms_checked,
            "witness": enc(self.witness),
            "details": enc(self.details),
        }


@dataclass
class SensitivityReport:
    max_difference: float
    witness: tuple | None
    pairs_checked: int
    gamma: float
    slack: float = 0.0

    @property
    def passed(self) -> bool:
        return self.max_difference <= self.gamma + self.slack


def bernoulli_divergence(p: float, q: float) -> float:
    """Pure max-divergence ``D_inf(Bern(p) || Bern(q))``."""
    if not (0 < p < 1 and 0 < q < 1):
        if p == q:
            return 0.0
        return math.inf
    return max(math.log(p / q), math.log1p(-p) - math.log1p(-q))


def value_divergence(u, v, epsilon: float):
    """Symmetric divergence between ``sigmoid_bias(u)`` and ``sigmoid_bias(v)``, in log space.

    Returns ``(divergence, outcome)`` where outcome is the event attaining it.
    """
    lp_u, lq_u = log_sigmoid_bias(u, epsilon)
    lp_v, lq_v = log_sigmoid_bias(v, epsilon)
    d1 = abs(lp_u - lp_v)
    d0 = abs(lq_u - lq_v)
    return (d1, 1) if d1 >= d0 else (d0, 0)


def enumerate_datasets(N: int, n: int) -> Iterator[SortedDataset]:
    """All canonical datasets of ``n`` examples over ``[N] x {0,1}``.

    Canonical sorting identifies datasets that are permutations of each
    other, so this walks the multisets rather than all ``(2N)^n`` sequences.
    """
    symbols = [LabeledPoint(x, y) for x in range(1, N + 1) for y in (0, 1)]
    for combo in itertools.combinations_with_replacement(symbols, n):
        yield SortedDataset(tuple(combo), N)


def enumerate_neighbors(S: SortedDataset) -> Iterator[SortedDataset]:
    """Every replace-one neighbor of ``S``, including self-replacements (``n * 2N`` total)."""
    symbols = [LabeledPoint(x, y) for x in range(1, S.universe_size + 1) for y in (0, 1)]
    for i in range(len(S)):
        for sym in symbols:
            yield S.replace(i, sym)


def _key(S: SortedDataset) -> tuple:
    return tuple((p.x, p.y) for p in S.points)


def _values(S: SortedDataset, T: int, cache: dict) -> np.ndarray:
    key = _key(S)
    vals = cache.get(key)
    if vals is None:
        zeros, ones = S.label_counts()
        vals = walk_values_from_counts(zeros, ones, T)
        cache[key] = vals
    return vals


def _check_guard(N: int, n: int, max_N: int, max_size: int):
    if N < 1 or n < 1:
        raise ValueError("audit needs N >= 1 and n >= 1")
    if N > max_N or n > max_size:
        raise ValueError(f"audit size guard exceeded: N={N} (max {max_N}), n={n} (max {max_size})")


def epw_value_pairs(N: int, n: int, T: int, *, max_N: int = DEFAULT_MAX_N,
                    max_size: int = DEFAULT_MAX_SIZE) -> tuple[dict, int]:
    """Walk-value pairs ``(V(S,x), V(S',x))`` over all replace-one neighbors and queries.

    Returns ``(pairs, count)``: ``pairs`` maps each observed value pair to one
    witness ``(S, S', x)``; ``count`` is the number of (pair, query) checks.
    """
    _check_guard(N, n, max_N, max_size)
    cache: dict = {}
    pairs: dict = {}
    checked = 0
    for S in enumerate_datasets(N, n):
        vs = _values(S, T, cache)
        for S2 in enumerate_neighbors(S):
            vs2 = _values(S2, T, cache)
            checked += N
            for x in range(N):
                key = (int(vs[x]), int(vs2[x]))
                if key not in pairs:
                    pairs[key] = (S, S2, x + 1)
    return pairs, checked


def worst_from_pairs(pairs: dict, epsilon: float) -> tuple[float, tuple | None]:
    worst, witness = 0.0, None
    for (u, v), (S, S2, x) in sorted(pairs.items()):
        d, outcome = value_divergence(u, v, epsilon)
        if witness is None or d > worst:
            worst, witness = d, (S, S2, x, outcome)
    return worst, witness


def audit_epw(N: int, n: int, params: WalkParams, *, max_N: int = DEFAULT_MAX_N,
              max_size: int = DEFAULT_MAX_SIZE) -> AuditReport:
    """Exhaustive replace-one audit of the walk at fixed ``(N, n, T, eps)``."""
    pairs, checked = epw_value_pairs(N, n, params.T, max_N=max_N, max_size=max_size)
    worst, witness = worst_from_pairs(pairs, params.epsilon)
    return AuditReport(worst, witness, checked, bound=params.epsilon,
                       details={"N": N, "n": n, "T": params.T, "epsilon": params.epsilon})


def audit_epw_grid(max_N: int, max_size: int, Ts: Sequence[int], epsilons: Sequence[float]) -> list[AuditReport]:
    """:func:`audit_epw` for every ``N <= max_N``, ``n <= max_size`` and parameter pair.

    Value pairs are collected once per ``T`` and reused for every epsilon.
    """
    reports = []
    for T in Ts:
        merged: dict = {}
        checked = 0
        for N in range(1, max_N + 1):
            for n in range(1, max_size + 1):
                pairs, c = epw_value_pairs(N, n, T, max_N=max_N, max_size=max_size)
                checked += c
                for key, w in pairs.items():
                    merged.setdefault(key, w)
        for eps in epsilons:
            worst, witness = worst_from_pairs(merged, eps)
            reports.append(AuditReport(worst, witness, checked, bound=eps,
                                       details={"max_N": max_N, "max_n": max_size, "T": T, "epsilon": eps}))
    return reports


def reevaluate_epw_witness(report: AuditReport) -> float:
    """Recompute the divergence of an EPW audit witness from scratch."""
    S, S2, x, outcome = report.witness
    params = WalkParams(report.details["T"], report.details["epsilon"])
    p, q = epw_bias(S, x, params), epw_bias(S2, x, params)
    if outcome == 1:
        return abs(math.log(p) - math.log(q))
    return abs(math.log1p(-p) - math.log1p(-q))


def removal_sensitivity(max_N: int, max_size: int, T: int) -> tuple[int, tuple | None, int]:
    """Largest ``|V(S,x) - V(S^{-i},x)|`` over all datasets, removals and queries.

    Returns ``(max_change, witness, checks)``.
    """
    worst, witness, checked = 0, None, 0
    for N in range(1, max_N + 1):
        cache: dict = {}
        for n in range(1, max_size + 1):
            for S in enumerate_datasets(N, n):
                vs = _values(S, T, cache)
                seen = set()
                for i, p in enumerate(S.points):
                    if p in seen:
                        continue
                    seen.add(p)
                    vs2 = _values(S.without(i), T, cache)
                    diff = np.abs(vs - vs2)
                    checked += N
                    j = int(np.argmax(diff))
                    if diff[j] > worst or witness is None:
                        worst, witness = int(diff[j]), (S, i, j + 1)
    return worst, witness, checked


def audit_label_vectors(r: int, epsilon: float) -> AuditReport:
    """Soft-majority vote audit over all ``2^r`` label vectors and every one-coordinate change."""
    if not 1 <= r <= 16:
        raise ValueError(f"r must be in [1, 16] for exhaustive enumeration, got {r}")
    worst, witness, checked = 0.0, None, 0
    for labels in itertools.product((0, 1), repeat=r):
        u = 2 * sum(labels) - r
        for i in range(r):
            flipped = labels[:i] + (1 - labels[i],) + labels[i + 1:]
            d, outcome = value_divergence(u, 2 * sum(flipped) - r, epsilon)
            checked += 1
            if witness is None or d > worst:
                worst, witness = d, (labels, flipped, None, outcome)
    return AuditReport(worst, witness, checked, bound=epsilon, details={"r": r, "epsilon": epsilon})


def audit_sensitivity(trainer: Callable[[Sequence], Callable[[Any], float]], S: Sequence,
                      probes: Sequence, gamma: float, pool: Sequence, slack: float = 0.0) -> SensitivityReport:
    """Largest replace-one prediction change of ``trainer`` at the probe points.

    Every element of ``S`` is replaced by every element of ``pool``.
    """
    if len(probes) == 0:
        raise ValueError("probes must be nonempty")
    S = list(S)
    base = trainer(S)
    base_preds = [base(x) for x in probes]
    worst, witness, checked = 0.0, None, 0
    for i in range(len(S)):
        for z in pool:
            S2 = S[:i] + [z] + S[i + 1:]
            f2 = trainer(S2)
            for x, b in zip(probes, base_preds):
                d = abs(b - f2(x))
                checked += 1
                if witness is None or d > worst:
                    worst, witness = d, (i, z, x)
    return SensitivityReport(float(worst), witness, checked, gamma, slack)


def audit_subsample_aggregate(N: int, n: int, r: int, epsilon: float, k: int = 1) -> AuditReport:
    """Exhaustive replace-one audit of index-partitioned threshold ERM with soft-majority voting.

    A replace-one change alters exactly one subsample of size ``n // r``, so
    the audit runs over every subsample and each of its neighbors, with the
    other ``r - 1`` models contributing any count of ones in ``[0, r - 1]``
    (every count is reachable: all-ones data trains the constant-1 threshold,
    all-zeros data the constant-0 one).
    """
    from .aggregate import threshold_erm

    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= n, got r={r}, n={n}")
    m = n // r
    learner = threshold_erm(N, k)
    labels_cache: dict = {}

    def labels(D: SortedDataset) -> np.ndarray:
        key = _key(D)
        if key not in labels_cache:
            labels_cache[key] = learner(D.points).labels()
        return labels_cache[key]

    worst, witness, checked = 0.0, None, 0
    for D in enumerate_datasets(N, m):
        f = labels(D)
        for D2 in enumerate_neighbors(D):
            f2 = labels(D2)
            for x in range(N):
                for others in range(r):
                    u = 2 * (others + int(f[x])) - r
                    v = 2 * (others + int(f2[x])) - r
                    d, outcome = value_divergence(u, v, epsilon)
                    checked += 1
                    if witness is None or d > worst:
                        worst, witness = d, (D, D2, x + 1, outcome)
    return AuditReport(worst, witness, checked, bound=epsilon,
                       details={"N": N, "n": n, "r": r, "epsilon": epsilon, "subsample": m})


def audit_pipeline_bruteforce(N: int, n: int, r: int, epsilon: float, k: int = 1) -> AuditReport:
    """Literal audit over all ``(2N)^n`` example sequences; only for tiny sizes."""
    from .aggregate import index_partition, pac_ensemble_bias, threshold_erm

    if (2 * N) ** n > 200_000:
        raise ValueError("sequence space too large for brute force")
    learner = threshold_erm(N, k)
    symbols = [LabeledPoint(x, y) for x in range(1, N + 1) for y in (0, 1)]

    def biases(seq) -> list[float]:
        models = [learner(sub) for sub in index_partition(seq, r)]
        return [pac_ensemble_bias([h(x) for h in models], epsilon) for x in range(1, N + 1)]

    cache: dict = {}
    worst, witness, checked = 0.0, None, 0
    for seq in itertools.product(symbols, repeat=n):
        if seq not in cache:
            cache[seq] = biases(seq)
        b = cache[seq]
        for i in range(n):
            for z in symbols:
                seq2 = seq[:i] + (z,) + seq[i + 1:]
                if seq2 not in cache:
                    cache[seq2] = biases(seq2)
                for x in range(N):
                    d = max(bernoulli_divergence(b[x], cache[seq2][x]), bernoulli_divergence(cache[seq2][x], b[x]))
                    checked += 1
                    if witness is None or d > worst:
                        worst, witness = d, (seq, seq2, x + 1, None)
    return AuditReport(worst, witness, checked, bound=epsilon, details={"N": N, "n": n, "r": r, "epsilon": epsilon})
