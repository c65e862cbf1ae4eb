"""Prediction-stable convex regression with output perturbation.

Linear predictors ``f(w, x) = <w, x>`` over the Euclidean ball ``B(R)``,
trained either by regularized ERM or by one-pass projected SGD, then
privatized by adding Laplace noise calibrated to their prediction stability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import RandomStream


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, gap: float, w: np.ndarray):
        super().__init__(message)
        self.gap = gap
        self.w = w


@dataclass(frozen=True)
class Loss:
    """Scalar loss ``l(a, y)`` of prediction ``a`` against label ``y``."""

    name: str
    lipschitz: float
    smoothness: float | None

    def value(self, a, y):
        a = np.asarray(a, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.name == "absolute":
            return np.abs(a - y)
        # log(1 + e^a) - y a, stable for large |a|
        return np.logaddexp(0.0, a) - y * a

    def derivative(self, a, y):
        a = np.asarray(a, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.name == "absolute":
            return np.sign(a - y)
        return _expit(a) - y


def _expit(a):
    a = np.asarray(a, dtype=float)
    e = np.exp(-np.abs(a))
    return np.where(a >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


ABSOLUTE = Loss("absolute", lipschitz=1.0, smoothness=None)
LOGISTIC = Loss("logistic", lipschitz=1.0, smoothness=0.25)
LOSSES = {"absolute": ABSOLUTE, "logistic": LOGISTIC}


@dataclass(frozen=True)
class ConvexProblem:
    """Linear prediction over ``B(radius)`` with features of norm at most ``feature_bound``.

    ``reg`` is the coefficient of ``reg * ||w||^2``, so the regularized
    objective is ``2 * reg`` strongly convex (:attr:`strong_convexity`).
    """

    dimension: int
    radius: float
    loss: Loss
    feature_bound: float
    reg: float = 0.0

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if not self.feature_bound > 0:
            raise ValueError(f"feature_bound must be positive, got {self.feature_bound}")
        if self.reg < 0:
            raise ValueError(f"reg must be nonnegative, got {self.reg}")

    @property
    def strong_convexity(self) -> float:
        return 2.0 * self.reg

    def with_reg(self, reg: float) -> "ConvexProblem":
        return ConvexProblem(self.dimension, self.radius, self.loss, self.feature_bound, reg)

    def check_features(self, X: np.ndarray, tol: float = 1e-12):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dimension:
            raise ValueError(f"expected {self.dimension} features, got {X.shape[1]}")
        norms = np.linalg.norm(X, axis=1)
        if np.any(norms > self.feature_bound * (1 + tol)):
            raise ValueError(f"feature norm {norms.max():.6g} exceeds bound {self.feature_bound}")
        return X


def project_ball(w, R: float) -> np.ndarray:
    if not R > 0:
        raise ValueError(f"R must be positive, got {R}")
    w = np.asarray(w, dtype=float)
    norm = np.linalg.norm(w)
    if norm <= R:
        return w.copy()
    return w * (R / norm)


def loss_gradient(loss: Loss, w, x, y) -> np.ndarray:
    """Gradient in ``w`` of ``l(<w, x>, y)``."""
    x = np.asarray(x, dtype=float)
    return loss.derivative(np.dot(w, x), y) * x


def objective(problem: ConvexProblem, X, y, w, lam: float) -> float:
    return float(np.mean(problem.loss.value(X @ w, y)) + lam * np.dot(w, w))


def _objective_grad(problem: ConvexProblem, X, y, w, lam: float) -> np.ndarray:
    return X.T @ problem.loss.derivative(X @ w, y) / len(y) + 2.0 * lam * w


def erm_solve(problem: ConvexProblem, X, y, lam: float | None = None, tolerance: float = 1e-9,
              max_iter: int = 10**6, callback: Callable[[int, np.ndarray, float], None] | None = None) -> np.ndarray:
    """Minimize ``mean l(<w,x>, y) + lam ||w||^2`` over ``B(R)``.

    Smooth losses use projected gradient descent with step ``1/beta``; the
    returned iterate has suboptimality at most ``||G||^2 / (2 mu)`` where
    ``G`` is the gradient mapping and ``mu = 2 lam``. Non-smooth losses use
    projected subgradient steps ``2/(mu (t+1))`` with weighted averaging,
    whose suboptimality is at most ``2 G_max^2 / (mu (t+1))``.

    Raises :class:`ConvergenceError` if the certified gap does not reach
    ``tolerance`` within ``max_iter`` iterations.
    """
    lam = problem.reg if lam is None else lam
    if not lam > 0:
        raise ValueError(f"lam must be positive, got {lam}")
    X = problem.check_features(X)
    y = np.asarray(y, dtype=float)
    if len(y) != X.shape[0] or len(y) == 0:
        raise ValueError("X and y must be nonempty and the same length")
    R = problem.radius
    mu = 2.0 * lam

    if problem.loss.smoothness is not None:
        beta = problem.loss.smoothness * problem.feature_bound**2 + mu
        step = 1.0 / beta
        w = np.zeros(problem.dimension)
        gap = math.inf
        for t in range(max_iter):
            w_next = project_ball(w - step * _objective_grad(problem, X, y, w, lam), R)
            G = (w - w_next) / step
            gap = float(np.dot(G, G)) / (2.0 * mu)
            w = w_next
            if callback is not None:
                callback(t, w, gap)
            if gap <= tolerance:
                return w
        raise ConvergenceError(f"certified gap {gap:.3g} above tolerance after {max_iter} iterations", gap, w)

    g_max = problem.loss.lipschitz * problem.feature_bound + mu * R
    w = np.zeros(problem.dimension)
    avg = np.zeros(problem.dimension)
    weight = 0.0
    gap = math.inf
    for t in range(1, max_iter + 1):
        w = project_ball(w - (2.0 / (mu * (t + 1))) * _objective_grad(problem, X, y, w, lam), R)
        weight += t
        avg += (t / weight) * (w - avg)
        gap = 2.0 * g_max**2 / (mu * (t + 1))
        if callback is not None:
            callback(t, avg, gap)
        if gap <= tolerance:
            return avg
    raise ConvergenceError(f"certified gap {gap:.3g} above tolerance after {max_iter} iterations", gap, avg)


def psgd_step_size(problem: ConvexProblem, n: int) -> float:
    return problem.radius / (problem.feature_bound * problem.loss.lipschitz * math.sqrt(n))


def psgd_run(problem: ConvexProblem, X, y) -> np.ndarray:
    """One pass of projected SGD from the origin in the given order; returns the average iterate.

    Requires a smooth loss with ``sigma * L_f^2 <= 2 / eta``.
    """
    if problem.loss.smoothness is None:
        raise ValueError(f"PSGD stability needs a smooth loss, got {problem.loss.name}")
    X = problem.check_features(X)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n == 0 or X.shape[0] != n:
        raise ValueError("X and y must be nonempty and the same length")
    eta = psgd_step_size(problem, n)
    sigma = problem.loss.smoothness * problem.feature_bound**2
    if sigma > 2.0 / eta:
        raise ValueError(f"smoothness {sigma:.6g} exceeds 2/eta = {2.0 / eta:.6g}")
    w = np.zeros(problem.dimension)
    total = np.zeros(problem.dimension)
    for i in range(n):
        w = project_ball(w - eta * loss_gradient(problem.loss, w, X[i], y[i]), problem.radius)
        total += w
    return total / n


def stability_rate(problem: ConvexProblem, n: int, algorithm: str) -> float:
    """Uniform replace-one prediction stability rate of ``algorithm`` on ``n`` examples."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    Lf, Ll = problem.feature_bound, problem.loss.lipschitz
    if algorithm == "erm_strongly_convex":
        if problem.strong_convexity <= 0:
            raise ValueError("ERM stability needs a positive strong-convexity modulus")
        return 4.0 * Lf**2 * Ll / (problem.strong_convexity * n)
    if algorithm == "psgd":
        return problem.radius * Lf / math.sqrt(n)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def regularizer_lambda(problem: ConvexProblem, n: int, epsilon: float) -> float:
    """Regularization weight balancing stability noise against regularization bias."""
    if n < 1 or not epsilon > 0:
        raise ValueError("need n >= 1 and epsilon > 0")
    Lf, Ll, R = problem.feature_bound, problem.loss.lipschitz, problem.radius
    return 2.0 * Lf * Ll / (R * math.sqrt(n * epsilon / (1.0 + epsilon)))


def noisy_predict(predictor: Callable, x, gamma: float, epsilon: float, rng: RandomStream) -> float:
    """``predictor(x)`` plus Laplace noise of scale ``gamma / epsilon``."""
    if not gamma > 0 or not epsilon > 0:
        raise ValueError("gamma and epsilon must be positive")
    return float(predictor(x)) + rng.laplace(gamma / epsilon)


def noise_loss_bound(loss: Loss, gamma: float, epsilon: float) -> float:
    """Bound on the expected extra loss from the Laplace noise.

    Smooth losses get ``sigma * gamma^2 / eps^2``; otherwise ``L * gamma / eps``.
    """
    if loss.smoothness is not None:
        return loss.smoothness * gamma**2 / epsilon**2
    return loss.lipschitz * gamma / epsilon


def linear_predictor(w) -> Callable:
    w = np.asarray(w, dtype=float)
    return lambda x: float(np.dot(w, x))


def private_erm_predictor(problem: ConvexProblem, X, y, epsilon: float, rng: RandomStream,
                          lam: float | None = None, tolerance: float = 1e-9) -> Callable:
    """Regularized ERM released through output perturbation, one noise draw per query."""
    n = len(y)
    lam = regularizer_lambda(problem, n, epsilon) if lam is None else lam
    prob = problem.with_reg(lam)
    w = erm_solve(prob, X, y, lam, tolerance)
    gamma = stability_rate(prob, n, "erm_strongly_convex")
    f = linear_predictor(w)
    return lambda x: noisy_predict(f, x, gamma, epsilon, rng)


def sample_ball_features(n: int, d: int, bound: float, rng: RandomStream) -> np.ndarray:
    """``n`` feature vectors uniform in the ``d``-ball of radius ``bound``."""
    g = rng.generator.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radii = bound * rng.generator.random(n) ** (1.0 / d)
    return g * radii[:, None]


def sample_logistic_data(n: int, w_true: np.ndarray, bound: float, rng: RandomStream) -> tuple[np.ndarray, np.ndarray]:
    """Features uniform in a ball; labels Bernoulli(sigmoid(<w_true, x>)) in {0, 1}."""
    X = sample_ball_features(n, len(w_true), bound, rng)
    p = _expit(X @ w_true)
    y = (rng.generator.random(n) < p).astype(float)
    return X, y
