"""Moving partial sums, block schemes and window variances."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import PreconditionError
from .estimate import Estimate
from .model import SamplePath, SequenceModel, cross_covariance, covariance_matrix, simulate, INDEPENDENT


@dataclass(frozen=True)
class Window:
    """The moving window ``X_{p+1}, ..., X_{p+n}``."""

    p: int
    n: int

    def __post_init__(self):
        if self.p < 0 or self.n < 0:
            raise PreconditionError(f"window needs p >= 0 and n >= 0, got p={self.p}, n={self.n}")

    @property
    def first(self) -> int:
        return self.p + 1

    @property
    def last(self) -> int:
        return self.p + self.n


@dataclass(frozen=True)
class BlockScheme:
    """``n = m * ell + r`` with ``0 <= r < ell``."""

    ell: int
    m: int
    r: int

    def __post_init__(self):
        if self.ell < 1 or self.m < 0 or not 0 <= self.r < self.ell:
            raise PreconditionError(f"invalid block scheme {self}")

    @property
    def n(self) -> int:
        return self.m * self.ell + self.r


@dataclass(frozen=True)
class BlockIncrements:
    """Normalized block sums ``Y_j = (S'_{j ell} - S'_{(j-1) ell}) / sqrt(ell)``."""

    values: np.ndarray
    scheme: BlockScheme
    remainder: float


def integer_root(n: int, k: int = 3) -> int:
    """``floor(n ** (1/k))`` computed exactly for integers."""
    if n < 0:
        raise ValueError("n must be >= 0")
    x = int(round(n ** (1.0 / k)))
    while x**k > n:
        x -= 1
    while (x + 1) ** k <= n:
        x += 1
    return x


BlockRule = Union[int, str, Callable[[int], int]]


def block_length(n: int, rule: BlockRule = "cuberoot") -> int:
    """Block length ``ell(n)`` from a rule.

    ``rule`` is a fixed integer, ``"cuberoot"`` (``floor(n^(1/3))``, the
    default), ``"sqrt"``, ``"power:a"`` for ``floor(n^a)``, or a callable.
    """
    if callable(rule):
        return int(rule(n))
    if isinstance(rule, (int, np.integer)) and not isinstance(rule, bool):
        return int(rule)
    if isinstance(rule, str):
        if rule.strip().lstrip("-").isdigit():
            return int(rule)
        if rule == "cuberoot":
            return integer_root(n, 3)
        if rule == "sqrt":
            return integer_root(n, 2)
        if rule.startswith("power:"):
            a = float(rule.split(":", 1)[1])
            return int(math.floor(n**a + 1e-9))
    raise PreconditionError(f"unknown block rule {rule!r}")


def make_block_scheme(n: int, rule: BlockRule = "cuberoot") -> BlockScheme:
    if n < 1:
        raise PreconditionError("block schemes need n >= 1")
    ell = block_length(n, rule)
    if not 1 <= ell <= n:
        raise PreconditionError(f"block length {ell} outside [1, n={n}]")
    m, r = divmod(n, ell)
    return BlockScheme(ell, m, r)


def _window_values(path: SamplePath, window: Window) -> np.ndarray:
    if window.n == 0:
        return path.values[:0]
    if window.first < path.first or window.last > path.last:
        raise PreconditionError(
            f"window {window.first}..{window.last} exceeds path {path.first}..{path.last}"
        )
    start = window.first - path.first
    return path.values[start:start + window.n]


def moving_sum(path: SamplePath, window: Window) -> float:
    """``S'_n = X_{p+1} + ... + X_{p+n}``; zero for an empty window."""
    return float(np.sum(_window_values(path, window)))


def block_increments(path: SamplePath, window: Window, scheme: BlockScheme) -> BlockIncrements:
    if scheme.n != window.n:
        raise PreconditionError(f"scheme covers n={scheme.n} but the window has n={window.n}")
    x = _window_values(path, window)
    body = x[: scheme.m * scheme.ell].reshape(scheme.m, scheme.ell)
    y = body.sum(axis=1) / math.sqrt(scheme.ell)
    return BlockIncrements(values=y, scheme=scheme, remainder=float(np.sum(x[scheme.m * scheme.ell:])))


def window_variance(
    model: SequenceModel,
    window: Window,
    mode: str = "exact",
    R: int = 0,
    seed: int = 0,
    workers: int = 1,
) -> Estimate:
    """``s'_n^2 = Var(S'_n)``, exactly or by Monte Carlo over ``R`` replicates.

    The Monte-Carlo standard error is the delta-method one,
    ``sqrt((m4 - s^4) / R)`` with ``m4`` the sample fourth central moment.
    """
    if mode == "exact":
        v = cross_covariance(model, window.p, window.n, window.p, window.n)
        return Estimate(max(v, 0.0))
    if mode != "monte-carlo":
        raise PreconditionError(f"mode must be 'exact' or 'monte-carlo', got {mode!r}")
    if R < 2:
        raise PreconditionError("Monte-Carlo variance needs R >= 2")
    sums = simulate(model, window.p, window.n, R, seed,
                    reduce=lambda x: x.sum(axis=1), workers=workers)
    v = float(np.var(sums, ddof=1))
    c = sums - sums.mean()
    m4 = float(np.mean(c**4))
    se = math.sqrt(max(m4 - v * v, 0.0) / R)
    return Estimate(v, se, R)


def exact_variance(model: SequenceModel, p: int, n: int) -> float:
    return float(window_variance(model, Window(p, n)))


def block_variances(model: SequenceModel, window: Window, scheme: BlockScheme) -> np.ndarray:
    """Exact ``Var(S'_{j ell} - S'_{(j-1) ell})`` for ``j = 1..m``."""
    if scheme.n != window.n:
        raise PreconditionError(f"scheme covers n={scheme.n} but the window has n={window.n}")
    return np.array([
        cross_covariance(model, window.p + (j - 1) * scheme.ell, scheme.ell,
                         window.p + (j - 1) * scheme.ell, scheme.ell)
        for j in range(1, scheme.m + 1)
    ])


def prefix_variances(model: SequenceModel, K: int) -> np.ndarray:
    """``s_k^2 = Var(X_1 + ... + X_k)`` for ``k = 0..K``."""
    out = np.zeros(K + 1)
    if K == 0:
        return out
    if model.kind == INDEPENDENT:
        out[1:] = np.cumsum(model.variance(np.arange(1, K + 1)))
        return out
    for k in range(1, K + 1):
        row = covariance_matrix(model, [k], np.arange(1, k + 1))[0]
        out[k] = out[k - 1] + row[-1] + 2.0 * row[:-1].sum()
    return out
