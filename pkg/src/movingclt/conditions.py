"""Convergence-condition statistics for moving partial sums.

Every statistic is computed from exact window and block variances. Moment
functionals (absolute moments, truncated second moments) are exact for
Gaussian, finite-support, uniform and Laplace laws and fall back to Monte
Carlo otherwise; fallbacks carry a standard error on the returned
:class:`~movingclt.estimate.Estimate`.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import laws
from .errors import PreconditionError
from .estimate import Estimate
from .model import (
    GAUSSIAN_ASSOC,
    INDEPENDENT,
    SequenceModel,
    covariance_matrix,
    cross_covariance,
    family_law,
    segment_law,
    simulate,
)
from .rng import aux_rng
from .sums import BlockScheme, Window, block_variances, exact_variance

#: Default pass threshold for a condition statistic at fixed n.
DEFAULT_THRESHOLD = 0.1
#: Trend check: the statistic at 4n must be at most this fraction of its value at n.
TREND_FACTOR = 0.5
MC_DRAWS = 10**6


def floor_nt(n: int, t: float) -> int:
    """``[n t]``, robust to decimal grid points such as ``0.29``."""
    return int(math.floor(round(n * t, 9)))


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class ConditionEntry:
    statistic: str
    value: float
    threshold: Optional[float] = None
    n: Optional[int] = None
    ell: Optional[int] = None
    delta: Optional[float] = None
    eps: Optional[float] = None
    stderr: float = 0.0

    @property
    def verdict(self) -> str:
        if self.threshold is None:
            return "info"
        return "pass" if self.value <= self.threshold else "fail"


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


CSV_COLUMNS = ("statistic", "n", "ell", "delta", "eps", "value", "threshold", "verdict")


@dataclass
class ConditionReport:
    entries: list[ConditionEntry] = field(default_factory=list)

    def add(self, statistic: str, value: float, threshold: Optional[float] = None, **ctx) -> None:
        se = getattr(value, "stderr", 0.0)
        value = float(value)
        if not math.isfinite(value) or value < 0:
            raise PreconditionError(f"statistic {statistic} is not a finite nonnegative number: {value}")
        self.entries.append(ConditionEntry(statistic, value, threshold, stderr=se, **ctx))

    def extend(self, other: "ConditionReport") -> "ConditionReport":
        self.entries.extend(other.entries)
        return self

    def __getitem__(self, name: str) -> float:
        for e in self.entries:
            if e.statistic == name:
                return e.value
        raise KeyError(name)

    def entry(self, name: str) -> ConditionEntry:
        for e in self.entries:
            if e.statistic == name:
                return e
        raise KeyError(name)

    def names(self) -> list[str]:
        return [e.statistic for e in self.entries]

    @property
    def all_pass(self) -> bool:
        return all(e.verdict != "fail" for e in self.entries)

    def rows(self) -> list[list[str]]:
        return [[e.statistic, _fmt(e.n), _fmt(e.ell), _fmt(e.delta), _fmt(e.eps),
                 _fmt(e.value), _fmt(e.threshold), e.verdict] for e in self.entries]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(CSV_COLUMNS)
        w.writerows(self.rows())
        return buf.getvalue()

    def to_dict(self) -> list[dict]:
        return [{"statistic": e.statistic, "n": e.n, "ell": e.ell, "delta": e.delta, "eps": e.eps,
                 "value": e.value, "stderr": e.stderr, "threshold": e.threshold,
                 "verdict": e.verdict} for e in self.entries]


def decay_verdict(value_n: float, value_4n: float, threshold: float = DEFAULT_THRESHOLD) -> bool:
    """Pass iff the value is below ``threshold`` and at least halves from n to 4n."""
    return value_n <= threshold and value_4n <= TREND_FACTOR * value_n


def trend_ratio(value_n: float, value_4n: float) -> float:
    """``value(4n) / value(n)``, with 0 for a statistic that already vanished."""
    if value_n == 0:
        return 0.0
    return value_4n / value_n


# ---------------------------------------------------------------------------
# moment functionals with Monte-Carlo fallback


def _window_s2(model: SequenceModel, window: Window) -> float:
    s2 = exact_variance(model, window.p, window.n)
    if not s2 > 0:
        raise PreconditionError(f"window variance is {s2}; the normalized statistic is undefined")
    return s2


def _marginal_laws(model: SequenceModel, window: Window) -> Counter:
    """Distinct marginal laws over the window, with multiplicities."""
    if model.kind in (INDEPENDENT, GAUSSIAN_ASSOC):
        uniq, counts = np.unique(_marginal_variances(model, window), return_counts=True)
        fam = "normal" if model.kind == GAUSSIAN_ASSOC else model.family
        return Counter({family_law(fam, float(v), model.df): int(c) for v, c in zip(uniq, counts)})
    return Counter(segment_law(model, k - 1, 1) for k in range(window.first, window.last + 1))


def _block_laws(model: SequenceModel, window: Window, scheme: BlockScheme) -> Counter:
    return Counter(segment_law(model, window.p + (j - 1) * scheme.ell, scheme.ell)
                   for j in range(1, scheme.m + 1))


def _abs_fn(r):
    return lambda x: np.abs(x) ** r


def _tail_fn(a, strict):
    if strict:
        return lambda x: np.where(np.abs(x) > a, x * x, 0.0)
    return lambda x: np.where(np.abs(x) >= a, x * x, 0.0)


def _functional_sum(counted: Counter, exact: Callable[[laws.Law], float],
                    mc_fn: Callable[[np.ndarray], np.ndarray], mc_R: int, seed: int) -> Estimate:
    total = 0.0
    var = 0.0
    fell_back = False
    for tag, (law, count) in enumerate(sorted(counted.items(), key=lambda kv: repr(kv[0]))):
        try:
            total += count * exact(law)
        except NotImplementedError:
            v, se = laws.mc_functional(law, mc_fn, mc_R, aux_rng(seed, tag))
            total += count * v
            var += (count * se) ** 2
            fell_back = True
    if fell_back:
        return Estimate(total, math.sqrt(var), mc_R)
    return Estimate(total)


def _scale(est: Estimate, factor: float) -> Estimate:
    if est.exact:
        return Estimate(float(est) * factor)
    return Estimate(float(est) * factor, est.stderr * abs(factor), est.R)


def sum_abs_moments(model, window, r, mc_R=MC_DRAWS, seed=0) -> Estimate:
    """``sum_k E|X_k|^r`` over the window."""
    return _functional_sum(_marginal_laws(model, window), lambda law: law.abs_moment(r),
                           _abs_fn(r), mc_R, seed)


def sum_tail2(model, window, a, strict=False, mc_R=MC_DRAWS, seed=0) -> Estimate:
    """``sum_k E[X_k^2 ; |X_k| >= a]`` (``>`` when ``strict``)."""
    return _functional_sum(_marginal_laws(model, window), lambda law: law.tail2(a, strict),
                           _tail_fn(a, strict), mc_R, seed)


# ---------------------------------------------------------------------------
# independent-data conditions


def lyapounov_moving(model: SequenceModel, window: Window, delta: float,
                     mc_R: int = MC_DRAWS, seed: int = 0) -> Estimate:
    """``A'_n(delta) = s'_n^{-(2+delta)} sum E|X_k|^{2+delta}``."""
    if not delta > 0:
        raise PreconditionError("delta must be > 0")
    s = math.sqrt(_window_s2(model, window))
    return _scale(sum_abs_moments(model, window, 2 + delta, mc_R, seed), 1.0 / s ** (2 + delta))


def lindeberg_moving(model: SequenceModel, window: Window, eps: float,
                     mc_R: int = MC_DRAWS, seed: int = 0) -> Estimate:
    """``g_n(eps) = s'_n^{-2} sum E[X_k^2 ; |X_k| >= eps s'_n]``."""
    if not eps > 0:
        raise PreconditionError("eps must be > 0")
    s2 = _window_s2(model, window)
    return _scale(sum_tail2(model, window, eps * math.sqrt(s2), False, mc_R, seed), 1.0 / s2)


def _marginal_variances(model: SequenceModel, window: Window) -> np.ndarray:
    idx = np.arange(window.first, window.last + 1)
    if model.kind == INDEPENDENT:
        return model.variance(idx)
    if model.kind == GAUSSIAN_ASSOC and model.covariance == "ar1":
        return np.full(idx.size, model.ar1_variance)
    return np.array([covariance_matrix(model, [k], [k])[0, 0] for k in idx])


def uan_ratio(model: SequenceModel, window: Window) -> float:
    """``max_k sigma_k^2 / s'_n^2`` over the window."""
    s2 = _window_s2(model, window)
    return float(np.max(_marginal_variances(model, window)) / s2)


def offset_ratio(model: SequenceModel, window: Window) -> float:
    """``s_{n+p(n)} / s'_n``; exactly 1 when ``p = 0``."""
    s2 = _window_s2(model, window)
    if window.p == 0:
        return 1.0
    return math.sqrt(exact_variance(model, 0, window.n + window.p) / s2)


# ---------------------------------------------------------------------------
# scaling functions


@dataclass(frozen=True)
class ScalingFunction:
    """Limit ``a(t)`` of ``s_{[nt]}^2 / s_n^2`` on a grid, analytic or empirical."""

    grid: tuple[float, ...]
    values: tuple[float, ...]
    source: str
    func: Optional[Callable[[float], float]] = field(default=None, compare=False, repr=False)

    @classmethod
    def analytic(cls, func: Callable[[float], float], grid: Sequence[float],
                 name: str = "analytic") -> "ScalingFunction":
        grid = tuple(float(t) for t in grid)
        return cls(grid, tuple(float(func(t)) for t in grid), name, func)

    def __call__(self, t: float) -> float:
        if self.func is not None:
            return float(self.func(t))
        for g, v in zip(self.grid, self.values):
            if g == t:
                return v
        if t <= 0:
            return 0.0
        return float(np.interp(t, (0.0,) + self.grid, (0.0,) + self.values))

    def is_nondecreasing(self, slack: float = 0.0) -> bool:
        v = np.asarray(self.values)
        return bool(np.all(np.diff(v) >= -slack))


def _check_grid(grid: Sequence[float]) -> tuple[float, ...]:
    grid = tuple(float(t) for t in grid)
    if not grid:
        raise PreconditionError("empty time grid")
    if any(not 0 <= t <= 1 for t in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise PreconditionError(f"time grid must be increasing inside [0, 1]: {grid}")
    return grid


def scaling_ratio(model: SequenceModel, n: int, grid: Sequence[float]) -> ScalingFunction:
    """Empirical ``a(t_g) = s_{[n t_g]}^2 / s_n^2`` from exact variances."""
    grid = _check_grid(grid)
    s2 = exact_variance(model, 0, n)
    if not s2 > 0:
        raise PreconditionError("s_n^2 = 0")
    vals = tuple(exact_variance(model, 0, floor_nt(n, t)) / s2 for t in grid)
    return ScalingFunction(grid, vals, f"empirical(n={n})")


def pair_variance_gap(model: SequenceModel, n: int, points: Sequence[float],
                      a: Union[ScalingFunction, Callable[[float], float]]) -> float:
    """Deviation of the two-interval variance ratio from its scaling-function limit.

    ``points = (s1, s2, t1, t2)`` with ``0 <= s1 <= s2 <= t1 <= t2 <= 1``.
    """
    s1, s2, t1, t2 = (float(x) for x in points)
    if not (0 <= s1 <= s2 <= t1 <= t2 <= 1):
        raise PreconditionError(f"points must satisfy 0 <= s1 <= s2 <= t1 <= t2 <= 1, got {points}")
    sn2 = exact_variance(model, 0, n)
    if not sn2 > 0:
        raise PreconditionError("s_n^2 = 0")
    i1, i2, j1, j2 = (floor_nt(n, x) for x in (s1, s2, t1, t2))
    va = cross_covariance(model, i1, i2 - i1, i1, i2 - i1)
    vb = cross_covariance(model, j1, j2 - j1, j1, j2 - j1)
    cab = cross_covariance(model, i1, i2 - i1, j1, j2 - j1)
    ratio = (va + vb + 2.0 * cab) / sn2
    return abs(ratio - ((a(s2) - a(s1)) + (a(t2) - a(t1))))


# ---------------------------------------------------------------------------
# block hypotheses and regrouped / raw statistics


def block_hypotheses(model: SequenceModel, window: Window, scheme: BlockScheme,
                     threshold: float = DEFAULT_THRESHOLD) -> ConditionReport:
    """Statistics of (L), (H0), (Ha), (Hab), (Hb) on exact variances.

    ``Ha`` is reported as information; its pass/fail entry is ``Ha_gap = |Ha - 1|``.
    """
    s2 = _window_s2(model, window)
    bv = block_variances(model, window, scheme)
    rem = exact_variance(model, window.p + scheme.m * scheme.ell, scheme.r)
    ctx = {"n": window.n, "ell": scheme.ell}
    ha = float(bv.sum() / s2)
    rep = ConditionReport()
    rep.add("L", scheme.ell / window.n, threshold, **ctx)
    rep.add("H0", scheme.ell / s2, threshold, **ctx)
    rep.add("Ha", ha, None, **ctx)
    rep.add("Ha_gap", abs(ha - 1.0), threshold, **ctx)
    rep.add("Hab", rem / s2, threshold, **ctx)
    rep.add("Hb", float(bv.max() / s2), threshold, **ctx)
    return rep


def hc_statistic(model: SequenceModel, window: Window, scheme: BlockScheme, delta: float,
                 mode: str = "exact", R: int = 10**4, seed: int = 0, workers: int = 1,
                 mc_R: int = MC_DRAWS) -> Estimate:
    """``C_2(n) = s'_n^{-(2+delta)} sum_j E|block_j|^{2+delta}``.

    ``mode="exact"`` uses block laws (Gaussian and finite-support blocks in
    closed form); ``mode="monte-carlo"`` averages over ``R`` simulated windows.
    """
    if not delta > 0:
        raise PreconditionError("delta must be > 0")
    if scheme.n != window.n:
        raise PreconditionError("scheme does not match the window")
    s2 = exact_variance(model, window.p, window.n)
    if s2 == 0:
        return Estimate(0.0)
    norm = 1.0 / math.sqrt(s2) ** (2 + delta)
    r = 2 + delta
    if mode == "exact":
        total = _functional_sum(_block_laws(model, window, scheme),
                                lambda law: law.abs_moment(r), _abs_fn(r), mc_R, seed)
        return _scale(total, norm)
    if mode != "monte-carlo":
        raise PreconditionError(f"mode must be 'exact' or 'monte-carlo', got {mode!r}")
    if R < 2:
        raise PreconditionError("Monte-Carlo mode needs R >= 2")
    m, ell = scheme.m, scheme.ell

    def per_replicate(x):
        blocks = x[:, : m * ell].reshape(x.shape[0], m, ell).sum(axis=2)
        return np.sum(np.abs(blocks) ** r, axis=1) * norm

    vals = simulate(model, window.p, window.n, R, seed, reduce=per_replicate, workers=workers)
    return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(R)), R)


def _tau2(model, window, scheme) -> tuple[np.ndarray, float]:
    tj2 = block_variances(model, window, scheme)
    t2 = float(tj2.sum())
    if not t2 > 0:
        raise PreconditionError("tau'_n^2 = 0; regrouped statistics are undefined")
    return tj2, t2


def regrouped_statistics(model: SequenceModel, window: Window, scheme: BlockScheme,
                         delta: float, eps: float, threshold: float = DEFAULT_THRESHOLD,
                         mc_R: int = MC_DRAWS, seed: int = 0) -> ConditionReport:
    """Conditions on the block variables ``T_{j,n}`` normalized by ``tau'_n``.

    Entries: ``tau2`` (``tau'_n^2``), ``A_regrouped`` (``A''_n(delta)``),
    ``B_regrouped`` (``B''_n``, with its ``eps^-2`` factor) and
    ``L_regrouped`` (``L''_n(eps)``).
    """
    if not delta > 0 or not eps > 0:
        raise PreconditionError("delta and eps must be > 0")
    tj2, t2 = _tau2(model, window, scheme)
    tau = math.sqrt(t2)
    blocks = _block_laws(model, window, scheme)
    r = 2 + delta
    a2 = _functional_sum(blocks, lambda law: law.abs_moment(r), _abs_fn(r), mc_R, seed)
    l2 = _functional_sum(blocks, lambda law: law.tail2(eps * tau, False),
                         _tail_fn(eps * tau, False), mc_R, seed + 1)
    ctx = {"n": window.n, "ell": scheme.ell, "delta": delta, "eps": eps}
    rep = ConditionReport()
    rep.add("tau2", t2, None, **ctx)
    rep.add("A_regrouped", _scale(a2, 1.0 / tau**r), threshold, **ctx)
    rep.add("B_regrouped", float(tj2.max()) / (eps * eps * t2), threshold, **ctx)
    rep.add("L_regrouped", _scale(l2, 1.0 / t2), threshold, **ctx)
    return rep


def nonregrouped_statistics(model: SequenceModel, window: Window, scheme: BlockScheme,
                            delta: float, eps: float, threshold: float = DEFAULT_THRESHOLD,
                            mc_R: int = MC_DRAWS, seed: int = 0) -> ConditionReport:
    """Raw-data counterparts with the block-length powers.

    Entries: ``A_raw`` (``ell^{1+delta} s'^{-(2+delta)} sum E|X|^{2+delta}``),
    ``B_raw`` (``ell^2 max sigma^2 / (eps^2 s'^2)``), ``L_raw`` (``L'_n(eps)``)
    and ``L_raw_sufficient`` (``L'_n(eps / (2 ell))``, the form used as a
    sufficient condition for associated data).
    """
    if not delta > 0 or not eps > 0:
        raise PreconditionError("delta and eps must be > 0")
    if scheme.n != window.n:
        raise PreconditionError("scheme does not match the window")
    s2 = _window_s2(model, window)
    s = math.sqrt(s2)
    ell = scheme.ell
    r = 2 + delta
    ctx = {"n": window.n, "ell": ell, "delta": delta, "eps": eps}
    rep = ConditionReport()
    rep.add("A_raw", _scale(sum_abs_moments(model, window, r, mc_R, seed), ell ** (1 + delta) / s**r),
            threshold, **ctx)
    rep.add("B_raw", ell**2 * float(np.max(_marginal_variances(model, window))) / (eps * eps * s2),
            threshold, **ctx)
    rep.add("L_raw", raw_lindeberg(model, window, ell, eps, mc_R, seed), threshold, **ctx)
    rep.add("L_raw_sufficient", raw_lindeberg(model, window, ell, eps / (2 * ell), mc_R, seed),
            threshold, **ctx)
    return rep


def raw_lindeberg(model: SequenceModel, window: Window, ell: int, eps: float,
                  mc_R: int = MC_DRAWS, seed: int = 0) -> Estimate:
    """``L'_n(eps) = ell^2 s'^{-2} sum E[X^2 ; |X| > eps s'_n]``."""
    s2 = _window_s2(model, window)
    tail = sum_tail2(model, window, eps * math.sqrt(s2), True, mc_R, seed)
    return _scale(tail, ell**2 / s2)


@dataclass(frozen=True)
class Domination:
    name: str
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs


@dataclass(frozen=True)
class DominationReport:
    checks: tuple[Domination, ...]
    ratio2: float

    @property
    def verdict(self) -> bool:
        return all(c.holds for c in self.checks)

    def __getitem__(self, name: str) -> Domination:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def domination_check(model: SequenceModel, window: Window, scheme: BlockScheme,
                     delta: float, eps: float, mc_R: int = MC_DRAWS, seed: int = 0) -> DominationReport:
    """The three regrouped-vs-raw inequalities, with both sides reported.

    * ``BN-RS``: ``B'' <= (s'/tau')^2 B'``
    * ``Lyap-RS``: ``A''(delta) <= (s'/tau')^{2+delta} A'(delta)``
    * ``Lynder-O-2``: ``L''(eps) <= (s'/tau')^2 L'(eps / (2 ell))``
    """
    reg = regrouped_statistics(model, window, scheme, delta, eps, mc_R=mc_R, seed=seed)
    raw = nonregrouped_statistics(model, window, scheme, delta, eps, mc_R=mc_R, seed=seed)
    s2 = _window_s2(model, window)
    ratio2 = s2 / reg["tau2"]
    checks = (
        Domination("BN-RS", reg["B_regrouped"], ratio2 * raw["B_raw"]),
        Domination("Lyap-RS", reg["A_regrouped"], ratio2 ** ((2 + delta) / 2) * raw["A_raw"]),
        Domination("Lynder-O-2", reg["L_regrouped"], ratio2 * raw["L_raw_sufficient"]),
    )
    return DominationReport(checks, ratio2)


def independent_conditions(model: SequenceModel, window: Window, delta: float, eps: float,
                           threshold: float = DEFAULT_THRESHOLD, mc_R: int = MC_DRAWS,
                           seed: int = 0) -> ConditionReport:
    """Lyapounov, Lindeberg, UAN and offset-ratio entries for one window."""
    ctx = {"n": window.n}
    rep = ConditionReport()
    rep.add("lyapounov", lyapounov_moving(model, window, delta, mc_R, seed), threshold, delta=delta, **ctx)
    rep.add("lindeberg", lindeberg_moving(model, window, eps, mc_R, seed), threshold, eps=eps, **ctx)
    rep.add("uan", uan_ratio(model, window), threshold, **ctx)
    rep.add("offset_ratio", offset_ratio(model, window), None, **ctx)
    return rep
