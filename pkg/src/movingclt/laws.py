"""Centered one-dimensional laws with the moment functionals the conditions need.

Every law exposes its variance, absolute moments ``E|X|^r`` and truncated
second moments ``E[X^2; |X| >= a]``. Laws without a closed form for a
functional raise :class:`NotImplementedError`; callers fall back to Monte Carlo
through :func:`mc_functional`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special, stats

# Discrete enumeration of sums stops here; beyond it sums are sampled.
MAX_ATOMS = 1 << 20


class Law:
    """Base class for a centered law on the real line."""

    variance: float
    gaussian = False

    def abs_moment(self, r: float) -> float:
        raise NotImplementedError

    def tail2(self, a: float, strict: bool = False) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)


def _gaussian_abs_moment(r: float) -> float:
    return 2.0 ** (r / 2) * math.gamma((r + 1) / 2) / math.sqrt(math.pi)


@dataclass(frozen=True)
class Normal(Law):
    scale: float
    gaussian = True

    @property
    def variance(self) -> float:
        return self.scale**2

    def abs_moment(self, r: float) -> float:
        return self.scale**r * _gaussian_abs_moment(r)

    def tail2(self, a: float, strict: bool = False) -> float:
        if self.scale == 0.0:
            return 0.0
        if a <= 0:
            return self.variance
        z = a / self.scale
        return 2.0 * self.variance * (z * stats.norm.pdf(z) + stats.norm.sf(z))

    def sample(self, rng, size):
        return self.scale * rng.standard_normal(size)


@dataclass(frozen=True)
class Discrete(Law):
    """Finite-support law given by atoms and their probabilities."""

    values: tuple[float, ...]
    probs: tuple[float, ...]

    @classmethod
    def from_arrays(cls, values, probs) -> "Discrete":
        values = np.asarray(values, dtype=float)
        probs = np.asarray(probs, dtype=float)
        uniq, inv = np.unique(values, return_inverse=True)
        merged = np.zeros(uniq.size)
        np.add.at(merged, inv, probs)
        return cls(tuple(uniq.tolist()), tuple(merged.tolist()))

    @property
    def variance(self) -> float:
        v = np.asarray(self.values)
        return float(np.dot(self.probs, v * v))

    def abs_moment(self, r: float) -> float:
        return float(np.dot(self.probs, np.abs(self.values) ** r))

    def tail2(self, a: float, strict: bool = False) -> float:
        v = np.asarray(self.values)
        mask = np.abs(v) > a if strict else np.abs(v) >= a
        return float(np.dot(np.asarray(self.probs)[mask], v[mask] ** 2))

    def sample(self, rng, size):
        return rng.choice(np.asarray(self.values), size=size, p=np.asarray(self.probs))


def rademacher(scale: float = 1.0) -> Discrete:
    if scale == 0.0:
        return Discrete((0.0,), (1.0,))
    return Discrete((-scale, scale), (0.5, 0.5))


@dataclass(frozen=True)
class Uniform(Law):
    """Uniform on ``[-half_width, half_width]``."""

    half_width: float

    @property
    def variance(self) -> float:
        return self.half_width**2 / 3.0

    def abs_moment(self, r: float) -> float:
        return self.half_width**r / (r + 1)

    def tail2(self, a: float, strict: bool = False) -> float:
        h = self.half_width
        if a >= h:
            return 0.0
        if a <= 0:
            return self.variance
        return (h**3 - a**3) / (3.0 * h)

    def sample(self, rng, size):
        return rng.uniform(-self.half_width, self.half_width, size)


@dataclass(frozen=True)
class Laplace(Law):
    scale: float

    @property
    def variance(self) -> float:
        return 2.0 * self.scale**2

    def abs_moment(self, r: float) -> float:
        return self.scale**r * math.gamma(r + 1)

    def tail2(self, a: float, strict: bool = False) -> float:
        b = self.scale
        if b == 0.0:
            return 0.0
        a = max(a, 0.0)
        return math.exp(-a / b) * (a * a + 2 * a * b + 2 * b * b)

    def sample(self, rng, size):
        return rng.laplace(0.0, self.scale, size)


@dataclass(frozen=True)
class StudentT(Law):
    """Scaled Student t; the truncated second moment is left to Monte Carlo."""

    df: float
    scale: float

    @property
    def variance(self) -> float:
        return self.scale**2 * self.df / (self.df - 2.0)

    def abs_moment(self, r: float) -> float:
        nu = self.df
        if r >= nu:
            return math.inf
        log_m = (
            (r / 2) * math.log(nu)
            + special.gammaln((r + 1) / 2)
            + special.gammaln((nu - r) / 2)
            - 0.5 * math.log(math.pi)
            - special.gammaln(nu / 2)
        )
        return self.scale**r * math.exp(log_m)

    def sample(self, rng, size):
        return self.scale * rng.standard_t(self.df, size)


@dataclass(frozen=True)
class Cauchy(Law):
    """Infinite-variance law, only ever used as a negative control."""

    scale: float

    @property
    def variance(self) -> float:
        return math.inf

    def abs_moment(self, r: float) -> float:
        return math.inf

    def tail2(self, a: float, strict: bool = False) -> float:
        return math.inf

    def sample(self, rng, size):
        return self.scale * rng.standard_cauchy(size)


@dataclass(frozen=True)
class LinearSum(Law):
    """Law of ``sum(c_i * L_i)`` for independent ``L_i``, known only by sampling."""

    laws: tuple[Law, ...]
    coefs: tuple[float, ...]

    @property
    def variance(self) -> float:
        return float(sum(c * c * law.variance for law, c in zip(self.laws, self.coefs)))

    def sample(self, rng, size):
        out = np.zeros(size)
        for law, c in zip(self.laws, self.coefs):
            out += c * law.sample(rng, size)
        return out


def scaled(law: Law, c: float) -> Law:
    """Law of ``c * X``."""
    c = float(c)
    a = abs(c)
    if isinstance(law, Normal):
        return Normal(a * law.scale)
    if isinstance(law, Discrete):
        return Discrete.from_arrays(c * np.asarray(law.values), law.probs)
    if isinstance(law, Uniform):
        return Uniform(a * law.half_width)
    if isinstance(law, Laplace):
        return Laplace(a * law.scale)
    if isinstance(law, StudentT):
        return StudentT(law.df, a * law.scale)
    if isinstance(law, Cauchy):
        return Cauchy(a * law.scale)
    return LinearSum((law,), (c,))


def linear_combination(laws: Sequence[Law], coefs: Sequence[float]) -> Law:
    """Law of ``sum(c_i * X_i)`` for independent ``X_i ~ laws[i]``.

    Gaussian terms combine in closed form, finite-support terms are convolved
    exactly (up to :data:`MAX_ATOMS` atoms); anything else is returned as a
    :class:`LinearSum` that can only be sampled.
    """
    pairs = [(law, float(c)) for law, c in zip(laws, coefs) if c != 0.0 and law.variance != 0.0]
    if not pairs:
        return Normal(0.0)
    if len(pairs) == 1:
        return scaled(*pairs[0])
    if all(isinstance(law, Normal) for law, _ in pairs):
        return Normal(math.sqrt(sum(c * c * law.variance for law, c in pairs)))
    if all(isinstance(law, Discrete) for law, _ in pairs):
        size = 1
        for law, _ in pairs:
            size *= len(law.values)
        if size <= MAX_ATOMS:
            vals = np.zeros(1)
            probs = np.ones(1)
            for law, c in pairs:
                v = c * np.asarray(law.values)
                vals = (vals[:, None] + v[None, :]).ravel()
                probs = (probs[:, None] * np.asarray(law.probs)[None, :]).ravel()
                vals, inv = np.unique(vals, return_inverse=True)
                merged = np.zeros(vals.size)
                np.add.at(merged, inv, probs)
                probs = merged
            return Discrete(tuple(vals.tolist()), tuple(probs.tolist()))
    return LinearSum(tuple(law for law, _ in pairs), tuple(c for _, c in pairs))


def mc_functional(
    law: Law,
    fn: Callable[[np.ndarray], np.ndarray],
    R: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Monte-Carlo mean of ``fn(X)`` and its standard error."""
    x = fn(law.sample(rng, R))
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(R))
