"""Monte-Carlo checks of the Gaussian and finite-dimensional Brownian limits."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .conditions import ScalingFunction, floor_nt
from .errors import PreconditionError
from .model import SequenceModel, certify_association, covariance_matrix, cross_covariance, simulate
from .sums import Window, exact_variance

KS_CRITICAL = 1.36
KS_RELAX = 1.5
CF_SLACK = 6.0
DEFAULT_CF_GRID = (-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0)


def ks_cutoff(R: int, relax: float = KS_RELAX) -> float:
    """Relaxed asymptotic 5% critical value of the KS distance."""
    return relax * KS_CRITICAL / math.sqrt(R)


def cf_slack(R: int) -> float:
    return CF_SLACK / math.sqrt(R)


@dataclass(frozen=True)
class ReplicateEnsemble:
    """``R`` independent realizations of a (vector) statistic, one row each."""

    values: np.ndarray
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        object.__setattr__(self, "values", v)

    @property
    def R(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]

    def column(self, j: int = 0) -> np.ndarray:
        return self.values[:, j]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["replicate"] + [f"y{j + 1}" for j in range(self.k)])
        for i, row in enumerate(self.values):
            w.writerow([i] + [format(float(x), ".17g") for x in row])
        return buf.getvalue()


def _scalar_sample(ensemble) -> np.ndarray:
    x = ensemble.values if isinstance(ensemble, ReplicateEnsemble) else np.asarray(ensemble, dtype=float)
    if x.ndim == 2:
        if x.shape[1] != 1:
            raise PreconditionError("expected a scalar ensemble (one column)")
        x = x[:, 0]
    if x.size == 0:
        raise PreconditionError("empty ensemble")
    return x


def mc_normalized_sums(model: SequenceModel, window: Window, R: int, seed: int,
                       workers: int = 1) -> ReplicateEnsemble:
    """``R`` independent draws of ``S'_n / s'_n``."""
    if R < 2:
        raise PreconditionError("R must be >= 2")
    s2 = exact_variance(model, window.p, window.n)
    if not s2 > 0:
        raise PreconditionError("s'_n = 0; the normalized sum is undefined")
    s = math.sqrt(s2)
    vals = simulate(model, window.p, window.n, R, seed, reduce=lambda x: x.sum(axis=1) / s,
                    workers=workers)
    return ReplicateEnsemble(vals, {"model": model.label(), "p": window.p, "n": window.n,
                                    "R": R, "seed": seed, "statistic": "S'_n/s'_n"})


def ks_to_normal(ensemble) -> float:
    """Kolmogorov-Smirnov distance between the empirical law and N(0, 1)."""
    x = np.sort(_scalar_sample(ensemble))
    R = x.size
    u = stats.norm.cdf(x)
    i = np.arange(1, R + 1)
    return float(max(np.max(i / R - u), np.max(u - (i - 1) / R)))


def cvm_to_normal(ensemble) -> float:
    """Cramer-von Mises statistic ``W^2`` against N(0, 1)."""
    x = np.sort(_scalar_sample(ensemble))
    R = x.size
    u = stats.norm.cdf(x)
    i = np.arange(1, R + 1)
    return float(1.0 / (12 * R) + np.sum((u - (2 * i - 1) / (2 * R)) ** 2))


@dataclass(frozen=True)
class CharFunctionEstimate:
    points: np.ndarray
    values: np.ndarray
    R: int


def ecf(ensemble, points) -> CharFunctionEstimate:
    """Empirical characteristic function ``(1/R) sum exp(i <t, row>)``.

    Scalar ensembles take scalar points; ``k``-vector ensembles take a
    ``(P, k)`` array of points.
    """
    x = ensemble.values if isinstance(ensemble, ReplicateEnsemble) else np.asarray(ensemble, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0:
        raise PreconditionError("empty ensemble")
    pts = np.asarray(points, dtype=float)
    scalar_points = pts.ndim <= 1
    pts2 = pts.reshape(-1, 1) if scalar_points else pts
    if pts2.shape[1] != x.shape[1]:
        raise PreconditionError(f"points have dimension {pts2.shape[1]}, ensemble has {x.shape[1]}")
    theta = x[:, 0:1] * pts2[:, 0][None, :] if x.shape[1] == 1 else x @ pts2.T
    vals = np.mean(np.cos(theta), axis=0) + 1j * np.mean(np.sin(theta), axis=0)
    return CharFunctionEstimate(pts, vals, x.shape[0])


# ---------------------------------------------------------------------------
# Newman's inequality


@dataclass(frozen=True)
class NewmanReport:
    indices: tuple[int, ...]
    points: np.ndarray
    gap: np.ndarray
    bound: np.ndarray
    slack: float
    exact_gap: Optional[np.ndarray]
    R: int
    seed: int

    @property
    def holds(self) -> np.ndarray:
        return self.gap <= self.bound + self.slack

    @property
    def verdict(self) -> bool:
        return bool(np.all(self.holds))


def newman_bound(cov: np.ndarray, points: np.ndarray) -> np.ndarray:
    """``(1/2) sum_{j != h} |t_j t_h| Cov(X_j, X_h)`` for each row of ``points``."""
    a = np.abs(np.atleast_2d(points))
    full = np.einsum("pj,jh,ph->p", a, cov, a)
    diag = np.einsum("pj,j->p", a * a, np.diag(cov))
    return 0.5 * (full - diag)


def gaussian_newman_gap(cov: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Population gap for a centered Gaussian vector."""
    t = np.atleast_2d(points)
    joint = np.exp(-0.5 * np.einsum("pj,jh,ph->p", t, cov, t))
    prod = np.exp(-0.5 * (t * t) @ np.diag(cov))
    return np.abs(joint - prod)


def diagonal_points(k: int, grid: Sequence[float] = DEFAULT_CF_GRID) -> np.ndarray:
    return np.outer(np.asarray(grid, dtype=float), np.ones(k))


def newman_verify(model: SequenceModel, indices: Sequence[int], points=None, R: int = 10**4,
                  seed: int = 0, workers: int = 1) -> NewmanReport:
    """Check the joint-vs-product characteristic function gap against Newman's bound.

    Joint and marginal characteristic functions come from one shared ensemble;
    the bound uses exact covariances and the verdict allows ``6/sqrt(R)``.
    """
    cert = certify_association(model)
    if not cert.certified:
        raise PreconditionError(f"model is not certified associated: {cert.reason}")
    idx = np.asarray(sorted(set(int(i) for i in indices)), dtype=np.int64)
    if idx.size == 0 or idx[0] < 1:
        raise PreconditionError("need at least one index >= 1")
    k = idx.size
    pts = diagonal_points(k) if points is None else np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != k:
        raise PreconditionError(f"points have dimension {pts.shape[1]}, expected {k}")
    lo, hi = int(idx[0]), int(idx[-1])
    cols = idx - lo
    x = simulate(model, lo - 1, hi - lo + 1, R, seed, reduce=lambda b: b[:, cols], workers=workers)
    joint = ecf(x, pts).values
    prod = np.ones(pts.shape[0], dtype=complex)
    for j in range(k):
        prod *= ecf(x[:, j], pts[:, j]).values
    cov = covariance_matrix(model, idx, idx)
    exact = gaussian_newman_gap(cov, pts) if model.is_gaussian else None
    return NewmanReport(tuple(int(i) for i in idx), pts, np.abs(joint - prod), newman_bound(cov, pts),
                        cf_slack(R), exact, R, seed)


# ---------------------------------------------------------------------------
# finite-dimensional distributions


def _check_fdd_grid(n: int, grid: Sequence[float]) -> tuple[float, ...]:
    grid = tuple(float(t) for t in grid)
    if not grid:
        raise PreconditionError("empty time grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise PreconditionError(f"time grid must be increasing: {grid}")
    if not (0 < grid[0] and grid[-1] <= 1):
        raise PreconditionError(f"time grid must lie in (0, 1]: {grid}")
    if floor_nt(n, grid[0]) < 1:
        raise PreconditionError(f"n * t_1 = {n * grid[0]} < 1")
    return grid


def fdd_ensemble(model: SequenceModel, n: int, grid: Sequence[float], R: int, seed: int,
                 workers: int = 1) -> ReplicateEnsemble:
    """Rows ``(Y_n(t_1), ..., Y_n(t_k))`` with ``Y_n(t) = S_{[nt]} / s_n``."""
    grid = _check_fdd_grid(n, grid)
    s2 = exact_variance(model, 0, n)
    if not s2 > 0:
        raise PreconditionError("s_n = 0")
    s = math.sqrt(s2)
    pos = np.array([floor_nt(n, t) for t in grid]) - 1

    def reduce(x):
        return np.cumsum(x, axis=1)[:, pos] / s

    vals = simulate(model, 0, n, R, seed, reduce=reduce, workers=workers)
    return ReplicateEnsemble(vals, {"model": model.label(), "n": n, "grid": list(grid),
                                    "R": R, "seed": seed, "statistic": "Y_n(t)"})


def increments(ensemble: ReplicateEnsemble) -> np.ndarray:
    """Row-wise increments ``Z_j = Y(t_j) - Y(t_{j-1})`` with ``Y(t_0) = 0``."""
    return np.diff(ensemble.values, axis=1, prepend=0.0)


@dataclass(frozen=True)
class FddCovarianceReport:
    empirical: np.ndarray
    target: np.ndarray
    max_deviation: float


def min_target(a: Union[ScalingFunction, Callable[[float], float]], grid: Sequence[float]) -> np.ndarray:
    """``M_{jh} = a(t_j) ∧ a(t_h)``."""
    av = np.array([a(t) for t in grid])
    return np.minimum(av[:, None], av[None, :])


def fdd_covariance_check(ensemble: ReplicateEnsemble,
                         a: Union[ScalingFunction, Callable[[float], float]]) -> FddCovarianceReport:
    """Compare ``E[Y(t_j) Y(t_h)]`` with ``a(t_j) ∧ a(t_h)``."""
    grid = ensemble.provenance.get("grid")
    if grid is None or len(grid) != ensemble.k:
        raise PreconditionError("ensemble carries no time grid matching its columns")
    if isinstance(a, ScalingFunction) and a.func is None and tuple(a.grid) != tuple(grid):
        raise PreconditionError(f"grid mismatch: ensemble {tuple(grid)} vs scaling function {a.grid}")
    y = ensemble.values
    emp = y.T @ y / ensemble.R
    target = min_target(a, grid)
    return FddCovarianceReport(emp, target, float(np.max(np.abs(emp - target))))


def increment_covariance(model: SequenceModel, n: int, grid: Sequence[float]) -> np.ndarray:
    """Exact ``Cov(Z_{j,n}, Z_{h,n})`` of the normalized increments."""
    grid = _check_fdd_grid(n, grid)
    s2 = exact_variance(model, 0, n)
    if not s2 > 0:
        raise PreconditionError("s_n = 0")
    cuts = [0] + [floor_nt(n, t) for t in grid]
    segs = [(cuts[j], cuts[j + 1] - cuts[j]) for j in range(len(grid))]
    k = len(segs)
    c = np.empty((k, k))
    for j in range(k):
        for h in range(j, k):
            c[j, h] = c[h, j] = cross_covariance(model, *segs[j], *segs[h]) / s2
    return c


def increment_decoupling_gaps(ensemble: ReplicateEnsemble, weights: Sequence[float], points) -> np.ndarray:
    """``|psi_{Z_n}(t) - prod_j psi_{Z_{j,n}}(t u_j)|`` for each scalar ``t``."""
    z = increments(ensemble)
    u = np.asarray(weights, dtype=float)
    if u.size != z.shape[1]:
        raise PreconditionError(f"{u.size} weights for {z.shape[1]} increments")
    ts = np.atleast_1d(np.asarray(points, dtype=float))
    if ts.ndim != 1:
        raise PreconditionError("increment decoupling takes scalar evaluation points")
    out = np.empty(ts.size)
    for i, t in enumerate(ts):
        theta = z * (t * u)[None, :]
        joint = np.mean(np.exp(1j * theta.sum(axis=1)))
        prod = np.prod(np.mean(np.exp(1j * theta), axis=0))
        out[i] = abs(joint - prod)
    return out


def increment_decoupling_gap(ensemble: ReplicateEnsemble, weights: Sequence[float], points) -> float:
    """Largest decoupling gap over the evaluation points."""
    return float(np.max(increment_decoupling_gaps(ensemble, weights, points)))


@dataclass(frozen=True)
class DecouplingReport:
    points: np.ndarray
    gap: np.ndarray
    bound: np.ndarray
    slack: float

    @property
    def verdict(self) -> bool:
        return bool(np.all(self.gap <= self.bound + self.slack))


def increment_decoupling_check(model: SequenceModel, n: int, grid: Sequence[float],
                               weights: Sequence[float], points=DEFAULT_CF_GRID, R: int = 4000,
                               seed: int = 0, workers: int = 1) -> DecouplingReport:
    """Decoupling gap of the weighted increments against Newman's bound on exact covariances."""
    ens = fdd_ensemble(model, n, grid, R, seed, workers)
    ts = np.atleast_1d(np.asarray(points, dtype=float))
    gaps = increment_decoupling_gaps(ens, weights, ts)
    cov = increment_covariance(model, n, grid)
    u = np.asarray(weights, dtype=float)
    bound = newman_bound(cov, ts[:, None] * u[None, :])
    return DecouplingReport(ts, gaps, bound, cf_slack(R))
