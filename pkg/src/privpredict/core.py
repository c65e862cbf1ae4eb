"""Shared domain types, privacy-budget arithmetic and noise primitives."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

_UINT64_MAX = 2**64 - 1


@dataclass(frozen=True, order=True)
class LabeledPoint:
    """A single example ``(x, y)`` over the integer domain ``[1, N]``."""

    x: int
    y: int

    def __post_init__(self):
        if self.y not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.y!r}")


@dataclass(frozen=True)
class SortedDataset:
    """Canonically sorted sample over ``[1, universe_size]``.

    Points are ordered by ``x`` and, at equal ``x``, label 0 precedes label 1.
    This makes every mechanism built on top a function of the multiset of
    examples. Use :meth:`from_points` to canonicalize arbitrary input; the
    constructor only validates.
    """

    points: tuple[LabeledPoint, ...]
    universe_size: int

    def __post_init__(self):
        if self.universe_size < 1:
            raise ValueError(f"universe_size must be >= 1, got {self.universe_size}")
        prev = None
        for p in self.points:
            if not 1 <= p.x <= self.universe_size:
                raise ValueError(f"point {p} outside [1, {self.universe_size}]")
            if prev is not None and (p.x, p.y) < (prev.x, prev.y):
                raise ValueError("points are not in canonical sorted order")
            prev = p

    @classmethod
    def from_points(cls, points: Iterable, universe_size: int) -> "SortedDataset":
        pts = [p if isinstance(p, LabeledPoint) else LabeledPoint(int(p[0]), int(p[1])) for p in points]
        return cls(tuple(sorted(pts)), universe_size)

    @classmethod
    def from_counts(cls, zeros: Sequence[int], ones: Sequence[int]) -> "SortedDataset":
        """Build from per-position label counts (index 0 is ``x = 1``)."""
        pts = []
        for i, (c0, c1) in enumerate(zip(zeros, ones)):
            pts.extend([LabeledPoint(i + 1, 0)] * int(c0))
            pts.extend([LabeledPoint(i + 1, 1)] * int(c1))
        return cls(tuple(pts), len(zeros))

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def xs(self) -> np.ndarray:
        return np.fromiter((p.x for p in self.points), dtype=np.int64, count=len(self.points))

    @property
    def ys(self) -> np.ndarray:
        return np.fromiter((p.y for p in self.points), dtype=np.int64, count=len(self.points))

    def label_counts(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(zeros, ones)`` count arrays of length ``universe_size``."""
        n = self.universe_size
        xs, ys = self.xs, self.ys
        ones = np.bincount(xs[ys == 1] - 1, minlength=n)
        zeros = np.bincount(xs[ys == 0] - 1, minlength=n)
        return zeros, ones

    def without(self, i: int) -> "SortedDataset":
        return SortedDataset(self.points[:i] + self.points[i + 1:], self.universe_size)

    def replace(self, i: int, point: LabeledPoint) -> "SortedDataset":
        rest = self.points[:i] + self.points[i + 1:]
        return SortedDataset.from_points(rest + (point,), self.universe_size)

    def append(self, points: Iterable) -> "SortedDataset":
        return SortedDataset.from_points(self.points + tuple(points), self.universe_size)


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        if not 0 <= self.delta <= 1:
            raise ValueError(f"delta must be in [0, 1], got {self.delta}")

    def group(self, k: int) -> "PrivacyBudget":
        return group_privacy_params(self, k)


class RandomStream:
    """Reproducible, splittable source of uniform draws.

    Backed by the counter-based Philox generator keyed by a
    ``SeedSequence(seed, spawn_key=(stream_id, *path))``. Identical keys give
    identical sequences; distinct keys give independent ones. :meth:`child`
    derives a sub-stream without consuming any draws from the parent.
    """

    def __init__(self, seed: int, stream_id: int = 0, path: tuple[int, ...] = ()):
        for name, v in (("seed", seed), ("stream_id", stream_id), *(("path", p) for p in path)):
            if not 0 <= int(v) <= _UINT64_MAX:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id, *self.path))
        self.generator = np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id}, path={self.path})"

    def child(self, i: int) -> "RandomStream":
        return RandomStream(self.seed, self.stream_id, self.path + (int(i),))

    def uniform(self) -> float:
        """One draw from the open interval (0, 1)."""
        while True:
            u = self.generator.random()
            if u > 0.0:
                return u

    def uniforms(self, size) -> np.ndarray:
        u = self.generator.random(size)
        # zero has probability 2**-53 per draw; redraw rather than bias
        while np.any(u == 0.0):
            mask = u == 0.0
            u[mask] = self.generator.random(int(mask.sum()))
        return u

    def laplace(self, scale: float, size=None):
        if size is None:
            return laplace_quantile(scale, self.uniform())
        return laplace_quantile(scale, self.uniforms(size))

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def choice(self, a, size=None, p=None):
        return self.generator.choice(a, size=size, p=p)


def sigmoid_bias(v, epsilon: float):
    """Probability of outputting 1 given walk/vote value ``v``.

    Evaluates ``e^{eps*v/2} / (1 + e^{eps*v/2})`` without overflow. Accepts
    scalars or arrays.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    z = np.asarray(v, dtype=float) * (epsilon / 2.0)
    out = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
    return float(out) if out.ndim == 0 else out


def log_sigmoid_bias(v, epsilon: float):
    """Return ``(log p, log(1 - p))`` for ``p = sigmoid_bias(v, epsilon)``."""
    z = np.asarray(v, dtype=float) * (epsilon / 2.0)
    log_p = -np.logaddexp(0.0, -z)
    log_q = -np.logaddexp(0.0, z)
    if log_p.ndim == 0:
        return float(log_p), float(log_q)
    return log_p, log_q


def laplace_quantile(scale: float, u):
    """Inverse CDF of the centered Laplace distribution with scale ``scale``."""
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u >= 1)):
        raise ValueError("u must lie in the open interval (0, 1)")
    out = np.where(u < 0.5, scale * np.log(2.0 * u), -scale * np.log(2.0 - 2.0 * u))
    return float(out) if out.ndim == 0 else out


def laplace_log_density(z, scale: float):
    return -np.abs(z) / scale - math.log(2.0 * scale)


def group_privacy_params(budget: PrivacyBudget, k: int) -> PrivacyBudget:
    """Privacy of a group of ``k`` changed elements: ``(k eps, k e^{eps(k-1)} delta)``."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    eps, delta = budget.epsilon, budget.delta
    if delta == 0:
        return PrivacyBudget(k * eps, 0.0)
    return PrivacyBudget(k * eps, min(1.0, k * math.exp(eps * (k - 1)) * delta))


def ceil_formula(value: float, rel_tol: float = 1e-9) -> int:
    """Ceiling that treats values within rounding noise of an integer as that integer."""
    r = round(value)
    if abs(value - r) <= rel_tol * max(1.0, abs(value)):
        return int(r)
    return math.ceil(value)
