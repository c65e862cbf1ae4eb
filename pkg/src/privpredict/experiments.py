"""Desk-scale experiments for the aggregation and convex mechanisms.

Each driver returns a small result object with the measured quantity, the
bound it is compared against, and a ``passed`` flag; :func:`csv_row` turns
any of them into a results-file row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .aggregate import agnostic_params, partition_indices, pac_params
from .convex import (LOGISTIC, ConvexProblem, erm_solve, loss_gradient, objective, psgd_run,
                     sample_logistic_data, stability_rate, sample_ball_features)
from .core import RandomStream, laplace_quantile, sigmoid_bias
from .epw import IntervalHypothesis, opt_weighted
from .genbounds import SourceDistribution, map_trials, mean_and_se

CSV_COLUMNS = ["experiment", "seed", "n", "epsilon", "alpha", "k", "lhs", "rhs", "pass"]


def fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


@dataclass
class ExperimentResult:
    experiment: str
    n: int
    epsilon: float
    alpha: float
    k: int
    measured: float
    bound: float
    passed: bool
    extra: dict = field(default_factory=dict)

    def row(self, seed: int) -> list[str]:
        return [fmt(v) for v in (self.experiment, seed, self.n, self.epsilon, self.alpha, self.k,
                                 self.measured, self.bound, self.passed)]


def vc_sample_size(alpha: float, beta: float, d: int) -> int:
    """Realizable PAC sample size ``max(4/a log2(2/b), 8d/a log2(13/a))`` for VC dimension ``d``."""
    return math.ceil(max(4.0 / alpha * math.log2(2.0 / beta), 8.0 * d / alpha * math.log2(13.0 / alpha)))


def _erm_labels(zeros: np.ndarray, ones: np.ndarray, k: int = 1) -> np.ndarray:
    _, endpoints = opt_weighted(ones, zeros, k)
    return IntervalHypothesis(endpoints, len(zeros)).labels()


def _subsample_labels(dist: SourceDistribution, n: int, r: int, rng: RandomStream) -> np.ndarray:
    """Train threshold ERM on ``r`` random disjoint subsamples; returns an ``(r, N)`` label matrix."""
    N = dist.universe_size
    idx = rng.child(0).choice(2 * N, size=n, p=dist.table.ravel())
    groups, _ = partition_indices(n, r, rng.child(1))
    labels = np.empty((r, N), dtype=np.int64)
    for j, g in enumerate(groups):
        c = np.bincount(idx[g], minlength=2 * N).reshape(N, 2)
        labels[j] = _erm_labels(c[:, 0], c[:, 1])
    return labels


def pac_experiment(alpha: float = 0.1, epsilon: float = 1.0, beta: float = 0.1, N: int = 100,
                   threshold: int = 37, trials: int = 200, seed: int = 0,
                   threads: int | None = None) -> ExperimentResult:
    """Soft-majority aggregation of threshold ERMs on realizable data."""
    r = pac_params(alpha, epsilon)
    m = vc_sample_size(alpha / 4, beta / r, 1)
    n = r * m
    dist = SourceDistribution.threshold(N, threshold, 0.0)
    truth = (np.arange(1, N + 1) >= threshold).astype(float)
    rng = RandomStream(seed, stream_id=1)

    def one(t: int) -> float:
        labels = _subsample_labels(dist, n, r, rng.child(t))
        p = sigmoid_bias(2 * labels.sum(axis=0) - r, epsilon)
        return math.fsum(dist.marginal * np.abs(truth - p))

    errs = map_trials(one, trials, threads)
    mean, se = mean_and_se(errs)
    return ExperimentResult("pac", n, epsilon, alpha, 1, mean, alpha, mean <= alpha + 3 * se,
                            {"r": r, "subsample": m, "se": se, "trials": trials})


def agnostic_experiment(alpha: float = 0.1, epsilon: float = 1.0, N: int = 20, threshold: int = 8,
                        eta: float = 0.2, subsample: int = 200, trials: int = 500, seed: int = 0,
                        threads: int | None = None) -> ExperimentResult:
    """Mean absolute change of the aggregated prediction caused by the Laplace noise."""
    r, scale = agnostic_params(alpha, epsilon)
    n = r * subsample
    dist = SourceDistribution.threshold(N, threshold, eta)
    rng = RandomStream(seed, stream_id=2)

    def one(t: int) -> tuple[float, float, float]:
        stream = rng.child(t)
        labels = _subsample_labels(dist, n, r, stream)
        v = labels.mean(axis=0)
        noisy = np.clip(v + laplace_quantile(scale, stream.child(2).uniforms(N)), 0.0, 1.0)
        shift = math.fsum(dist.marginal * np.abs(noisy - v))
        return shift, dist.population_error(v), dist.population_error(noisy)

    out = map_trials(one, trials, threads)
    mean, se = mean_and_se([s for s, _, _ in out])
    clean, _ = mean_and_se([c for _, c, _ in out])
    private, _ = mean_and_se([p for _, _, p in out])
    return ExperimentResult("agnostic", n, epsilon, alpha, 1, mean, alpha, mean <= alpha + 3 * se,
                            {"r": r, "noise_scale": scale, "se": se, "clean_error": clean,
                             "private_error": private, "opt": dist.opt_error(1), "trials": trials})


def _replace_one(X, y, rng: RandomStream, w_true, bound):
    i = int(rng.integers(len(y)))
    Xn, yn = sample_logistic_data(1, w_true, bound, rng)
    X2, y2 = X.copy(), y.copy()
    X2[i], y2[i] = Xn[0], yn[0]
    return X2, y2, i


def erm_stability_experiment(pairs: int = 200, tolerance: float = 1e-9, seed: int = 0,
                             threads: int | None = None) -> ExperimentResult:
    """Replace-one parameter distance of regularized logistic ERM against its stability bound.

    Configurations cycle over ``d in 1..5``, ``n in {10, 50}``, ``lambda_sc in {0.1, 1}``.
    """
    configs = [(d, n, lsc) for d in range(1, 6) for n in (10, 50) for lsc in (0.1, 1.0)]
    rng = RandomStream(seed, stream_id=3)

    def one(t: int) -> tuple[float, float, float, float]:
        d, n, lsc = configs[t % len(configs)]
        stream = rng.child(t)
        problem = ConvexProblem(d, 1.0, LOGISTIC, 1.0, reg=lsc / 2)
        w_true = 3.0 * sample_ball_features(1, d, 1.0, stream.child(0))[0]
        X, y = sample_logistic_data(n, w_true, 1.0, stream.child(1))
        X2, y2, _ = _replace_one(X, y, stream.child(2), w_true, 1.0)
        w1 = erm_solve(problem, X, y, tolerance=tolerance)
        w2 = erm_solve(problem, X2, y2, tolerance=tolerance)
        slack = 2.0 * math.sqrt(2.0 * tolerance / lsc)
        dist = float(np.linalg.norm(w1 - w2))
        bound = 4.0 * problem.feature_bound * problem.loss.lipschitz / (lsc * n) + slack
        # sup over the feature ball of |<w1 - w2, x>| is L_f * ||w1 - w2||
        pred = problem.feature_bound * dist
        rate = stability_rate(problem, n, "erm_strongly_convex") + problem.feature_bound * slack
        return dist, bound, pred, rate

    out = map_trials(one, pairs, threads)
    failures = sum(1 for dist, bound, pred, rate in out if dist > bound or pred > rate)
    worst = max(dist / bound for dist, bound, _, _ in out)
    return ExperimentResult("erm_stability", pairs, 0.0, 0.0, 0, float(failures), 0.0, failures == 0,
                            {"worst_ratio": worst, "pairs": pairs})


def psgd_stability_experiment(pairs: int = 200, seed: int = 0, threads: int | None = None) -> ExperimentResult:
    """Replace-one prediction change of one-pass PSGD against ``R L_f / sqrt(n)``."""
    configs = [(d, n) for d in range(1, 6) for n in (10, 50, 200)]
    rng = RandomStream(seed, stream_id=4)

    def one(t: int) -> tuple[float, float]:
        d, n = configs[t % len(configs)]
        stream = rng.child(t)
        problem = ConvexProblem(d, 1.0, LOGISTIC, 1.0)
        w_true = 3.0 * sample_ball_features(1, d, 1.0, stream.child(0))[0]
        X, y = sample_logistic_data(n, w_true, 1.0, stream.child(1))
        X2, y2, _ = _replace_one(X, y, stream.child(2), w_true, 1.0)
        diff = problem.feature_bound * float(np.linalg.norm(psgd_run(problem, X, y) - psgd_run(problem, X2, y2)))
        return diff, stability_rate(problem, n, "psgd")

    out = map_trials(one, pairs, threads)
    failures = sum(1 for diff, rate in out if diff > rate)
    worst = max(diff / rate for diff, rate in out)
    return ExperimentResult("psgd_stability", pairs, 0.0, 0.0, 0, float(failures), 0.0, failures == 0,
                            {"worst_ratio": worst, "pairs": pairs})


def gradient_check(cases: int = 1000, step: float = 1e-6, seed: int = 0) -> ExperimentResult:
    """Analytic loss gradients against central finite differences on random ``(w, x, y)``.

    Relative error is ``||g_fd - g|| / ||g||``. Logistic cases use labels in
    ``{0, 1}``; absolute-loss cases keep the margin at least ``1e-3`` from the kink.
    """
    rng = RandomStream(seed, stream_id=5)
    from .convex import ABSOLUTE

    worst = 0.0
    for t in range(cases):
        s = rng.child(t)
        d = int(s.integers(1, 6))
        w = sample_ball_features(1, d, 1.0, s.child(0))[0]
        x = sample_ball_features(1, d, 1.0, s.child(1))[0]
        if t % 2 == 0:
            loss, label = LOGISTIC, float(s.integers(0, 2))
        else:
            loss = ABSOLUTE
            label = float(np.dot(w, x)) + float(s.choice([-1.0, 1.0])) * (1e-3 + s.uniform())
        g = loss_gradient(loss, w, x, label)
        fd = np.empty(d)
        for j in range(d):
            e = np.zeros(d)
            e[j] = step
            fd[j] = (float(loss.value(np.dot(w + e, x), label)) - float(loss.value(np.dot(w - e, x), label))) / (2 * step)
        worst = max(worst, float(np.linalg.norm(fd - g) / np.linalg.norm(g)))
    return ExperimentResult("gradient_check", cases, 0.0, 0.0, 0, worst, 1e-6, worst <= 1e-6,
                            {"cases": cases})


def psgd_excess_loss(n: int = 400, d: int = 2, mc: int = 100_000, grid: int = 81, seed: int = 0) -> dict:
    """Monte-Carlo population loss of PSGD versus the best grid point in the unit disc."""
    rng = RandomStream(seed, stream_id=6)
    problem = ConvexProblem(d, 1.0, LOGISTIC, 1.0)
    w_true = np.array([2.0, -1.0][:d])
    X, y = sample_logistic_data(n, w_true, 1.0, rng.child(0))
    w = psgd_run(problem, X, y)
    Xp, yp = sample_logistic_data(mc, w_true, 1.0, rng.child(1))
    pop = objective(problem, Xp, yp, w, 0.0)
    axes = np.linspace(-1.0, 1.0, grid)
    cands = np.array([[a, b] for a in axes for b in axes if a * a + b * b <= 1.0])[:, :d]
    best = min(objective(problem, Xp, yp, c, 0.0) for c in cands)
    bound = 2.0 * problem.feature_bound * problem.loss.lipschitz * problem.radius / math.sqrt(n)
    return {"population_loss": pop, "best_grid_loss": best, "bound": bound, "mc": mc}
