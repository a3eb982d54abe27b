"""Discrete-time surplus process and ruin probabilities.

Claims are ``claim_mean + X_j`` with ``(X_j)`` a centered
:class:`~movingclt.model.SequenceModel`; the Brownian approximation keeps
``claim_mean`` as a deterministic drift and replaces the centered claim total
by ``s_N W(a(t))``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional, Union

import numpy as np
from scipy import stats

from .conditions import ScalingFunction
from .errors import ModelSchemaError, PreconditionError
from .estimate import Estimate
from .model import SequenceModel, _draw_chunk, model_from_dict, model_to_dict
from .rng import replicate_rng
from .sums import prefix_variances

ONE_PER_PERIOD = "one-per-period"
POISSON = "poisson"
MIN_REPLICATES = 100


@dataclass(frozen=True)
class SurplusModel:
    """``P_{t_n} = u + c t_n - (sum of claims reported up to t_n)``, ``t_n = n t0``."""

    u: float
    c: float
    t0: float
    claims: SequenceModel
    claim_mean: float = 0.0
    count: str = ONE_PER_PERIOD
    rate: float = 1.0

    def __post_init__(self):
        if not (self.u >= 0 and self.c >= 0 and self.t0 > 0):
            raise PreconditionError("need u >= 0, c >= 0 and t0 > 0")
        if self.count not in (ONE_PER_PERIOD, POISSON):
            raise PreconditionError(f"count process must be {ONE_PER_PERIOD!r} or {POISSON!r}")
        if self.count == POISSON and not self.rate > 0:
            raise PreconditionError("Poisson rate must be > 0")
        if self.claim_mean < 0:
            raise PreconditionError("claim mean must be >= 0")


def _count_seed(seed: int) -> int:
    return int(np.random.SeedSequence([seed, 0x636F756E74]).generate_state(1, np.uint64)[0])


def _claim_totals(model: SurplusModel, horizon: int, seed: int, replicate: int) -> np.ndarray:
    """Claim total reported in each of the periods ``1..horizon``."""
    if model.count == ONE_PER_PERIOD:
        x = _draw_chunk(model.claims, 0, horizon, seed, [replicate])[0]
        return model.claim_mean + x
    counts = replicate_rng(_count_seed(seed), replicate).poisson(model.rate * model.t0, horizon)
    total = int(counts.sum())
    x = model.claim_mean + _draw_chunk(model.claims, 0, total, seed, [replicate])[0]
    cum = np.concatenate([[0.0], np.cumsum(x)])
    ends = np.cumsum(counts)
    return np.diff(cum[np.concatenate([[0], ends])])


def simulate_surplus(model: SurplusModel, horizon: int, seed: int, replicate: int = 0) -> np.ndarray:
    """Exact surplus path ``(P_{t_1}, ..., P_{t_N})``."""
    if horizon < 1:
        raise PreconditionError("horizon must be >= 1")
    n = np.arange(1, horizon + 1)
    return model.u + model.c * n * model.t0 - np.cumsum(_claim_totals(model, horizon, seed, replicate))


def ruin_time(path) -> Optional[int]:
    """First period ``n >= 1`` with ``P_{t_n} < 0``, or None."""
    path = np.asarray(path, dtype=float)
    if path.size == 0:
        raise PreconditionError("empty surplus path")
    neg = np.flatnonzero(path < 0)
    return int(neg[0]) + 1 if neg.size else None


def claim_moments(model: SurplusModel, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance of the cumulative claim total at periods ``0..horizon``."""
    n = np.arange(horizon + 1)
    mu = model.claim_mean
    if model.count == ONE_PER_PERIOD:
        return mu * n, prefix_variances(model.claims, horizon)
    lam = model.rate * model.t0 * n
    kmax = int(lam[-1] + 10 * math.sqrt(lam[-1]) + 20)
    pv = prefix_variances(model.claims, kmax)
    k = np.arange(kmax + 1)
    pmf = stats.poisson.pmf(k[None, :], lam[:, None])
    # Var(sum_{j<=K} (mu + X_j)) = E[s_K^2] + mu^2 Var(K), K ~ Poisson(lam)
    return mu * lam, pmf @ pv + mu * mu * lam


@dataclass(frozen=True)
class BrownianSurrogate:
    """Drift, scale ``s_N`` and time change ``a(t_n)`` of the Gaussian surrogate."""

    drift: np.ndarray
    s_N: float
    a: np.ndarray

    @classmethod
    def build(cls, model: SurplusModel, horizon: int,
              scaling: Union[ScalingFunction, Callable[[float], float], None] = None) -> "BrownianSurrogate":
        mean, var = claim_moments(model, horizon)
        sN2 = float(var[-1])
        n = np.arange(1, horizon + 1)
        if scaling is None:
            a = var[1:] / sN2 if sN2 > 0 else n / horizon
        else:
            a = np.array([scaling(k / horizon) for k in n])
        if np.any(np.diff(np.concatenate([[0.0], a])) < -1e-12):
            raise PreconditionError("scaling function must be nondecreasing")
        return cls(mean[1:], math.sqrt(sN2), np.asarray(a, dtype=float))

    def covariance(self) -> np.ndarray:
        """Covariance of ``W(a(t_i))``: ``a(t_i) ∧ a(t_j)``."""
        return np.minimum(self.a[:, None], self.a[None, :])


def brownian_surplus(model: SurplusModel, horizon: int, seed: int, replicate: int = 0,
                     scaling: Union[ScalingFunction, Callable[[float], float], None] = None,
                     surrogate: Optional[BrownianSurrogate] = None) -> np.ndarray:
    """Surrogate path ``u + c t_n - E[claims_n] - s_N W(a(n / N))``."""
    if surrogate is None:
        surrogate = BrownianSurrogate.build(model, horizon, scaling)
    n = np.arange(1, horizon + 1)
    da = np.maximum(np.diff(np.concatenate([[0.0], surrogate.a])), 0.0)
    z = replicate_rng(seed, replicate).standard_normal(horizon)
    w = np.cumsum(np.sqrt(da) * z)
    return model.u + model.c * n * model.t0 - surrogate.drift - surrogate.s_N * w


def ruin_probability(model: SurplusModel, horizon: int, R: int, seed: int,
                     method: str = "exact-sim",
                     scaling: Union[ScalingFunction, Callable[[float], float], None] = None) -> Estimate:
    """Fraction of replicates ruined by the horizon, with its binomial standard error."""
    if R < MIN_REPLICATES:
        raise PreconditionError(f"R must be >= {MIN_REPLICATES}")
    if method == "exact-sim":
        ruined = sum(ruin_time(simulate_surplus(model, horizon, seed, r)) is not None for r in range(R))
    elif method == "brownian-approx":
        sur = BrownianSurrogate.build(model, horizon, scaling)
        ruined = sum(ruin_time(brownian_surplus(model, horizon, seed, r, surrogate=sur)) is not None
                     for r in range(R))
    else:
        raise PreconditionError(f"method must be 'exact-sim' or 'brownian-approx', got {method!r}")
    p = ruined / R
    return Estimate(p, math.sqrt(p * (1 - p) / R), R)


def scenario_from_dict(d: dict[str, Any], text: Optional[str] = None) -> tuple[SurplusModel, int]:
    """Build ``(SurplusModel, horizon)`` from a scenario description."""
    def num(key, default=None):
        if key not in d:
            if default is None:
                raise ModelSchemaError(f"field '{key}': required")
            return default
        v = d[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ModelSchemaError(f"field '{key}': expected a number")
        return v

    count = d.get("count", {"process": ONE_PER_PERIOD})
    if not isinstance(count, dict) or count.get("process") not in (ONE_PER_PERIOD, POISSON):
        raise ModelSchemaError(f"field 'count.process': must be {ONE_PER_PERIOD!r} or {POISSON!r}")
    if "claims" not in d:
        raise ModelSchemaError("field 'claims': required")
    claims = model_from_dict(d["claims"], text, path="claims.")
    horizon = num("horizon")
    if int(horizon) != horizon or horizon < 1:
        raise ModelSchemaError("field 'horizon': must be a positive integer")
    try:
        sm = SurplusModel(u=float(num("u")), c=float(num("c")), t0=float(num("t0", 1.0)), claims=claims,
                          claim_mean=float(num("claim_mean", 0.0)), count=count["process"],
                          rate=float(count.get("rate", 1.0)))
    except PreconditionError as exc:
        raise ModelSchemaError(str(exc)) from None
    return sm, int(horizon)


def scenario_to_dict(model: SurplusModel, horizon: int) -> dict[str, Any]:
    count: dict[str, Any] = {"process": model.count}
    if model.count == POISSON:
        count["rate"] = model.rate
    return {"u": model.u, "c": model.c, "t0": model.t0, "claim_mean": model.claim_mean,
            "claims": model_to_dict(model.claims), "count": count, "horizon": horizon}


def load_scenario(path: Union[str, Path]) -> tuple[SurplusModel, int]:
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelSchemaError(f"{path}: line {exc.lineno}: invalid JSON: {exc.msg}") from None
    try:
        return scenario_from_dict(d, text)
    except ModelSchemaError as exc:
        raise ModelSchemaError(f"{path}: {exc}") from None
