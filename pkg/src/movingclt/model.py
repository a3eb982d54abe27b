"""Sequence laws, association certificates and reproducible sample paths.

Indices are 1-based throughout, as in ``X_1, X_2, ...``. A window ``(p, n)``
covers ``X_{p+1}, ..., X_{p+n}``.
"""

from __future__ import annotations

import json
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np
from scipy import signal

from . import laws
from .errors import GenerationError, ModelSchemaError, PreconditionError
from .rng import replicate_rng

logger = logging.getLogger(__name__)

INDEPENDENT = "independent"
GAUSSIAN_ASSOC = "gaussian-assoc"
MA_ASSOC = "ma-assoc"
KINDS = (INDEPENDENT, GAUSSIAN_ASSOC, MA_ASSOC)

FAMILIES = ("normal", "rademacher", "uniform", "laplace", "student_t", "cauchy")
# Families with infinite variance; accepted only with negative_control=True.
NEGATIVE_CONTROL_FAMILIES = ("cauchy",)

VARIANCE_FORMS = ("constant", "linear", "power", "geometric")

#: Replicates generated together; fixed so that results never depend on workers.
CHUNK = 256


@dataclass(frozen=True)
class VarianceRule:
    """Variance sequence ``sigma_k^2`` as a function of the index ``k``.

    ``constant``: ``scale``; ``linear``: ``scale * k``; ``power``:
    ``scale * k**rate``; ``geometric``: ``scale * rate**k``.
    """

    form: str = "constant"
    scale: float = 1.0
    rate: float = 1.0

    def __post_init__(self):
        if self.form not in VARIANCE_FORMS:
            raise ModelSchemaError(f"variance rule must be one of {VARIANCE_FORMS}, got {self.form!r}")
        if not (math.isfinite(self.scale) and self.scale >= 0):
            raise ModelSchemaError("variance scale must be finite and >= 0")
        if self.form == "geometric" and not self.rate > 0:
            raise ModelSchemaError("geometric variance rate must be > 0")

    def __call__(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        if self.form == "constant":
            return np.full(k.shape, self.scale)
        if self.form == "linear":
            return self.scale * k
        if self.form == "power":
            return self.scale * k**self.rate
        return self.scale * self.rate**k


@dataclass(frozen=True)
class SequenceModel:
    """Generative law of a centered sequence ``(X_k)``.

    Use the constructors :meth:`independent`, :meth:`gaussian_ar1`,
    :meth:`gaussian_matrix` and :meth:`moving_average` rather than the raw
    initializer.
    """

    kind: str
    family: str = "normal"
    variance: VarianceRule = field(default_factory=VarianceRule)
    df: float = 5.0
    covariance: str = "ar1"
    phi: float = 0.0
    innovation_variance: float = 1.0
    matrix: Optional[tuple[tuple[float, ...], ...]] = None
    coefficients: tuple[float, ...] = ()
    negative_control: bool = False
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelSchemaError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind in (INDEPENDENT, MA_ASSOC):
            if self.family not in FAMILIES:
                raise ModelSchemaError(f"family must be one of {FAMILIES}, got {self.family!r}")
            if self.family in NEGATIVE_CONTROL_FAMILIES and not self.negative_control:
                raise ModelSchemaError(
                    f"family {self.family!r} has infinite variance; set negative_control to use it"
                )
            if self.family == "student_t" and not self.df > 2:
                raise ModelSchemaError("student_t needs df > 2 for a finite variance")
        if self.kind == GAUSSIAN_ASSOC:
            if self.covariance == "ar1":
                if not -1 < self.phi < 1:
                    raise ModelSchemaError("AR(1) coefficient phi must lie in (-1, 1)")
                if not self.innovation_variance > 0:
                    raise ModelSchemaError("innovation variance must be > 0")
            elif self.covariance == "matrix":
                if self.matrix is None:
                    raise ModelSchemaError("matrix covariance needs a matrix")
                c = np.asarray(self.matrix, dtype=float)
                if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] == 0:
                    raise ModelSchemaError("covariance matrix must be square and nonempty")
                if not np.all(np.isfinite(c)) or not np.array_equal(c, c.T):
                    raise ModelSchemaError("covariance matrix must be finite and symmetric")
                if np.any(np.diag(c) < 0):
                    raise ModelSchemaError("covariance matrix has a negative variance")
            else:
                raise ModelSchemaError(f"covariance rule must be 'ar1' or 'matrix', got {self.covariance!r}")
        if self.kind == MA_ASSOC:
            if not self.coefficients:
                raise ModelSchemaError("moving average needs at least one coefficient")
            if not all(math.isfinite(a) for a in self.coefficients):
                raise ModelSchemaError("moving-average coefficients must be finite")

    # constructors -----------------------------------------------------------

    @classmethod
    def independent(cls, family: str = "normal", variance: VarianceRule | float = 1.0, **kw) -> "SequenceModel":
        if not isinstance(variance, VarianceRule):
            variance = VarianceRule("constant", float(variance))
        return cls(kind=INDEPENDENT, family=family, variance=variance, **kw)

    @classmethod
    def gaussian_ar1(cls, phi: float, innovation_variance: float = 1.0, **kw) -> "SequenceModel":
        return cls(kind=GAUSSIAN_ASSOC, covariance="ar1", phi=float(phi),
                   innovation_variance=float(innovation_variance), **kw)

    @classmethod
    def gaussian_matrix(cls, matrix, **kw) -> "SequenceModel":
        m = tuple(tuple(float(x) for x in row) for row in np.asarray(matrix, dtype=float))
        return cls(kind=GAUSSIAN_ASSOC, covariance="matrix", matrix=m, **kw)

    @classmethod
    def moving_average(cls, coefficients: Sequence[float], family: str = "normal",
                       variance: VarianceRule | float = 1.0, **kw) -> "SequenceModel":
        if not isinstance(variance, VarianceRule):
            variance = VarianceRule("constant", float(variance))
        return cls(kind=MA_ASSOC, coefficients=tuple(float(a) for a in coefficients),
                   family=family, variance=variance, **kw)

    # basic properties -------------------------------------------------------

    @property
    def horizon(self) -> Optional[int]:
        """Largest defined index, or None for infinite sequences."""
        if self.kind == GAUSSIAN_ASSOC and self.covariance == "matrix":
            return len(self.matrix)
        return None

    @property
    def ar1_variance(self) -> float:
        return self.innovation_variance / (1.0 - self.phi**2)

    @property
    def q(self) -> int:
        return len(self.coefficients) - 1

    @property
    def is_gaussian(self) -> bool:
        return self.kind == GAUSSIAN_ASSOC or self.family == "normal"

    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind == INDEPENDENT:
            return f"independent-{self.family}-{self.variance.form}"
        if self.kind == GAUSSIAN_ASSOC:
            return f"ar1-phi{self.phi:g}" if self.covariance == "ar1" else "gaussian-matrix"
        return f"ma{self.q}-{self.family}"


# ---------------------------------------------------------------------------
# analytic moments


def _check_indices(model: SequenceModel, idx) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size and idx.min() < 1:
        raise PreconditionError("indices start at 1")
    h = model.horizon
    if h is not None and idx.size and idx.max() > h:
        raise PreconditionError(f"index {int(idx.max())} beyond the model horizon {h}")
    return idx


def _family_variances(model: SequenceModel, idx) -> np.ndarray:
    v = model.variance(idx)
    if model.family in NEGATIVE_CONTROL_FAMILIES:
        raise PreconditionError(f"{model.family} marginals have infinite variance (negative control)")
    return v


def family_law(family: str, var: float, df: float = 5.0) -> laws.Law:
    """Centered law of the named family with variance ``var``.

    For the Cauchy negative control ``var`` is read as the squared scale.
    """
    s = math.sqrt(var)
    if family == "normal":
        return laws.Normal(s)
    if family == "rademacher":
        return laws.rademacher(s)
    if family == "uniform":
        return laws.Uniform(s * math.sqrt(3.0))
    if family == "laplace":
        return laws.Laplace(s / math.sqrt(2.0))
    if family == "student_t":
        return laws.StudentT(df, s * math.sqrt((df - 2.0) / df))
    if family == "cauchy":
        return laws.Cauchy(s)
    raise ModelSchemaError(f"unknown family {family!r}")


def covariance_matrix(model: SequenceModel, rows, cols) -> np.ndarray:
    """Exact ``Cov(X_i, X_j)`` for ``i`` in ``rows`` and ``j`` in ``cols``."""
    rows = _check_indices(model, rows)
    cols = _check_indices(model, cols)
    i = rows[:, None]
    j = cols[None, :]
    if model.kind == INDEPENDENT:
        v = _family_variances(model, rows)
        return np.where(i == j, v[:, None], 0.0)
    if model.kind == GAUSSIAN_ASSOC:
        if model.covariance == "ar1":
            return model.ar1_variance * model.phi ** np.abs(i - j).astype(float)
        c = np.asarray(model.matrix, dtype=float)
        return c[np.ix_(rows - 1, cols - 1)]
    # moving average: Cov = sum_a a_a a_{a+d} var(eps_{i-a}), d = j - i
    a = np.asarray(model.coefficients)
    q = model.q
    d = j - i
    out = np.zeros(d.shape)
    for s in range(q + 1):
        e = i - s
        b = s + d
        ok = (b >= 0) & (b <= q) & (e >= 1)
        if not ok.any():
            continue
        var_e = _family_variances(model, np.where(ok, e, 1))
        out += np.where(ok, a[s] * a[np.clip(b, 0, q)] * var_e, 0.0)
    return out


def variance_at(model: SequenceModel, k: int) -> float:
    """Exact marginal variance ``sigma_k^2``."""
    if k < 1:
        raise PreconditionError("k must be >= 1")
    return float(covariance_matrix(model, [k], [k])[0, 0])


def covariance_at(model: SequenceModel, j: int, h: int) -> float:
    """Exact ``Cov(X_j, X_h)``; symmetric in ``(j, h)`` by construction."""
    if j < 1 or h < 1:
        raise PreconditionError("indices must be >= 1")
    lo, hi = min(j, h), max(j, h)
    return float(covariance_matrix(model, [lo], [hi])[0, 0])


def _ma_weights(model: SequenceModel, p: int, n: int) -> tuple[int, np.ndarray]:
    """Innovation weights of ``X_{p+1} + ... + X_{p+n}``.

    Returns ``(e0, w)`` with the sum equal to ``sum_t w[t] * eps_{e0 + t}``;
    innovations with index < 1 are absent.
    """
    q = model.q
    e0 = p + 1 - q
    w = np.zeros(n + q)
    for s, a in enumerate(model.coefficients):
        # X_k contains a_s * eps_{k-s}; k in [p+1, p+n] -> e in [p+1-s, p+n-s]
        w[q - s: q - s + n] += a
    if e0 < 1:
        w = w[1 - e0:]
        e0 = 1
    return e0, w


def _ar1_cross(model: SequenceModel, p1: int, n1: int, p2: int, n2: int) -> float:
    phi = model.phi
    i = np.arange(p1 + 1, p1 + n1 + 1, dtype=float)
    b1, b2 = p2 + 1, p2 + n2
    if phi == 0.0:
        return float(model.ar1_variance * np.count_nonzero((i >= b1) & (i <= b2)))
    # sum_{j=b1}^{b2} phi^{|j-i|}, split at j >= i and j < i
    # exponents are clamped so the masked-out branch never overflows
    lo = np.maximum(i, b1)
    up = np.where(lo <= b2, phi ** (lo - i) * (1 - phi ** np.maximum(b2 - lo + 1, 0)) / (1 - phi), 0.0)
    hi = np.minimum(i - 1, b2)
    down = np.where(hi >= b1, phi ** np.maximum(i - hi, 0) * (1 - phi ** np.maximum(hi - b1 + 1, 0))
                    / (1 - phi), 0.0)
    return float(model.ar1_variance * np.sum(up + down))


def cross_covariance(model: SequenceModel, p1: int, n1: int, p2: int, n2: int) -> float:
    """Exact covariance of the window sums over ``(p1, n1)`` and ``(p2, n2)``."""
    if min(p1, n1, p2, n2) < 0:
        raise PreconditionError("windows need p >= 0 and n >= 0")
    if n1 == 0 or n2 == 0:
        return 0.0
    _check_indices(model, [p1 + n1, p2 + n2])
    if model.kind == INDEPENDENT:
        lo, hi = max(p1, p2) + 1, min(p1 + n1, p2 + n2)
        if hi < lo:
            return 0.0
        return float(np.sum(_family_variances(model, np.arange(lo, hi + 1))))
    if model.kind == GAUSSIAN_ASSOC and model.covariance == "ar1":
        return _ar1_cross(model, p1, n1, p2, n2)
    if model.kind == MA_ASSOC:
        e1, w1 = _ma_weights(model, p1, n1)
        e2, w2 = _ma_weights(model, p2, n2)
        lo, hi = max(e1, e2), min(e1 + w1.size, e2 + w2.size) - 1
        if hi < lo:
            return 0.0
        var_e = _family_variances(model, np.arange(lo, hi + 1))
        return float(np.sum(w1[lo - e1: hi - e1 + 1] * w2[lo - e2: hi - e2 + 1] * var_e))
    c = np.asarray(model.matrix, dtype=float)
    return float(c[p1:p1 + n1, p2:p2 + n2].sum())


def segment_law(model: SequenceModel, p: int, n: int) -> laws.Law:
    """Law of the window sum ``X_{p+1} + ... + X_{p+n}``."""
    if model.kind == GAUSSIAN_ASSOC:
        return laws.Normal(math.sqrt(max(cross_covariance(model, p, n, p, n), 0.0)))
    if model.kind == INDEPENDENT:
        idx = np.arange(p + 1, p + n + 1)
        if model.family == "normal":
            return laws.Normal(math.sqrt(float(np.sum(model.variance(idx)))))
        terms = [family_law(model.family, float(v), model.df) for v in model.variance(idx)]
        return laws.linear_combination(terms, np.ones(n))
    e0, w = _ma_weights(model, p, n)
    var_e = model.variance(np.arange(e0, e0 + w.size))
    if model.family == "normal":
        return laws.Normal(math.sqrt(float(np.sum(w * w * var_e))))
    terms = [family_law(model.family, float(v), model.df) for v in var_e]
    return laws.linear_combination(terms, w)


def marginal_law(model: SequenceModel, k: int) -> laws.Law:
    if k < 1:
        raise PreconditionError("k must be >= 1")
    return segment_law(model, k - 1, 1)


# ---------------------------------------------------------------------------
# association


@dataclass(frozen=True)
class Certificate:
    certified: bool
    reason: str


def certify_association(model: SequenceModel) -> Certificate:
    """Rule-based association certificate; never guesses."""
    if model.kind == INDEPENDENT:
        return Certificate(True, "independent family (independent variables are associated)")
    if model.kind == GAUSSIAN_ASSOC:
        if model.covariance == "ar1":
            if model.phi >= 0:
                return Certificate(True, "Gaussian with nonnegative covariances (AR(1), phi >= 0)")
            return Certificate(False, "Gaussian AR(1) with phi < 0 has negative covariances")
        c = np.asarray(model.matrix, dtype=float)
        if np.all(c >= 0):
            return Certificate(True, "Gaussian with nonnegative covariance matrix")
        return Certificate(False, "Gaussian covariance matrix has negative entries")
    if all(a >= 0 for a in model.coefficients):
        return Certificate(True, "nonnegative-coefficient filter of independent innovations")
    return Certificate(False, "moving average with a negative coefficient")


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class SamplePath:
    """Realization of ``X_{first}, ..., X_{first + n - 1}``."""

    first: int
    values: np.ndarray
    seed: int
    replicate: int

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def last(self) -> int:
        return self.first + self.n - 1


def _standard_draws(family: str, df: float, rng: np.random.Generator, size) -> np.ndarray:
    if family == "normal":
        return rng.standard_normal(size)
    if family == "rademacher":
        return 2.0 * rng.integers(0, 2, size) - 1.0
    if family == "uniform":
        return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size)
    if family == "laplace":
        return rng.laplace(0.0, 1.0 / math.sqrt(2.0), size)
    if family == "student_t":
        return rng.standard_t(df, size) * math.sqrt((df - 2.0) / df)
    if family == "cauchy":
        return rng.standard_cauchy(size)
    raise ModelSchemaError(f"unknown family {family!r}")


@lru_cache(maxsize=4)
def _cholesky(model: SequenceModel, p: int, n: int) -> np.ndarray:
    idx = np.arange(p + 1, p + n + 1)
    c = covariance_matrix(model, idx, idx)
    try:
        return np.linalg.cholesky(c)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * float(np.max(np.diag(c)))
        logger.warning("covariance section not positive definite; retrying with jitter %g", jitter)
        try:
            return np.linalg.cholesky(c + jitter * np.eye(n))
        except np.linalg.LinAlgError as exc:
            raise GenerationError("covariance section is not positive semidefinite") from exc


def _draw_chunk(model: SequenceModel, p: int, n: int, seed: int, reps: Sequence[int]) -> np.ndarray:
    out = np.empty((len(reps), n))
    if n == 0:
        return out
    if model.kind == INDEPENDENT:
        scale = np.sqrt(model.variance(np.arange(p + 1, p + n + 1)))
        for row, r in enumerate(reps):
            out[row] = _standard_draws(model.family, model.df, replicate_rng(seed, r), n)
        return out * scale
    if model.kind == GAUSSIAN_ASSOC:
        if model.covariance == "ar1":
            # stationary start, then X_{k+1} = phi X_k + innovation
            for row, r in enumerate(reps):
                out[row] = replicate_rng(seed, r).standard_normal(n)
            out[:, 0] *= math.sqrt(model.ar1_variance)
            out[:, 1:] *= math.sqrt(model.innovation_variance)
            return signal.lfilter([1.0], [1.0, -model.phi], out, axis=1)
        L = _cholesky(model, p, n)
        # row by row so a replicate never depends on its chunk
        for row, r in enumerate(reps):
            out[row] = L @ replicate_rng(seed, r).standard_normal(n)
        return out
    q = model.q
    eps = np.empty((len(reps), n + q))
    for row, r in enumerate(reps):
        eps[row] = _standard_draws(model.family, model.df, replicate_rng(seed, r), n + q)
    e = np.arange(p + 1 - q, p + n + 1)
    eps *= np.where(e >= 1, np.sqrt(model.variance(np.maximum(e, 1))), 0.0)
    out[:] = 0.0
    for s, a in enumerate(model.coefficients):
        out += a * eps[:, q - s: q - s + n]
    return out


def _validate_range(model: SequenceModel, p: int, n: int):
    if p < 0 or n < 0:
        raise PreconditionError("need p >= 0 and n >= 0")
    if n and model.horizon is not None and p + n > model.horizon:
        raise PreconditionError(f"window ends at {p + n}, beyond the model horizon {model.horizon}")


def gen_path(model: SequenceModel, p: int, n: int, seed: int, replicate: int = 0) -> SamplePath:
    """Realization of ``(X_{p+1}, ..., X_{p+n})``, a pure function of its arguments."""
    _validate_range(model, p, n)
    values = _draw_chunk(model, p, n, seed, [replicate])[0]
    return SamplePath(first=p + 1, values=values, seed=seed, replicate=replicate)


def simulate(
    model: SequenceModel,
    p: int,
    n: int,
    R: int,
    seed: int,
    reduce: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    workers: int = 1,
) -> np.ndarray:
    """Generate ``R`` replicate windows and optionally reduce each chunk.

    ``reduce`` maps a ``(c, n)`` block of paths to a ``(c, ...)`` array.
    Replicates are produced in fixed chunks of :data:`CHUNK`, so the result is
    bit-identical for every value of ``workers``.
    """
    _validate_range(model, p, n)
    if R < 0:
        raise PreconditionError("R must be >= 0")

    def run(start: int) -> np.ndarray:
        reps = range(start, min(start + CHUNK, R))
        block = _draw_chunk(model, p, n, seed, reps)
        return block if reduce is None else np.asarray(reduce(block))

    starts = list(range(0, R, CHUNK))
    if not starts:
        empty = np.empty((0, n))
        return empty if reduce is None else np.asarray(reduce(empty))
    if workers > 1 and len(starts) > 1:
        if model.kind == GAUSSIAN_ASSOC and model.covariance == "matrix":
            _cholesky(model, p, n)  # factorize once before fanning out
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    return np.concatenate(parts, axis=0)


# ---------------------------------------------------------------------------
# model description files


def _fail(path: str, msg: str, text: Optional[str] = None):
    where = ""
    if text is not None:
        key = path.rsplit(".", 1)[-1]
        m = re.search(r'"%s"\s*:' % re.escape(key), text)
        if m:
            where = f"line {text.count(chr(10), 0, m.start()) + 1}: "
    raise ModelSchemaError(f"{where}field '{path}': {msg}")


def _number(d: dict, key: str, path: str, text, default=None, cond=None, what=""):
    if key not in d:
        if default is None:
            _fail(f"{path}{key}", "required", text)
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(f"{path}{key}", f"expected a number, got {type(v).__name__}", text)
    if cond is not None and not cond(v):
        _fail(f"{path}{key}", what, text)
    return float(v)


def model_from_dict(d: dict[str, Any], text: Optional[str] = None, path: str = "") -> SequenceModel:
    """Build a :class:`SequenceModel` from its JSON-shaped description."""
    if not isinstance(d, dict):
        _fail(path.rstrip(".") or "<root>", "expected an object", text)
    known = {"kind", "name", "family", "variance", "df", "covariance", "coefficients",
             "negative_control", "mean"}
    for k in d:
        if k not in known:
            _fail(f"{path}{k}", "unknown field", text)
    kind = d.get("kind")
    if kind not in KINDS:
        _fail(f"{path}kind", f"must be one of {list(KINDS)}", text)
    if "mean" in d and d["mean"] != 0:
        _fail(f"{path}mean", "non-centered families are rejected; marginals must have mean 0", text)
    name = d.get("name", "")
    if not isinstance(name, str):
        _fail(f"{path}name", "expected a string", text)
    neg = d.get("negative_control", False)
    if not isinstance(neg, bool):
        _fail(f"{path}negative_control", "expected true or false", text)
    kw: dict[str, Any] = {"name": name, "negative_control": neg}

    if kind in (INDEPENDENT, MA_ASSOC):
        fam = d.get("family", "normal")
        if fam not in FAMILIES:
            _fail(f"{path}family", f"must be one of {list(FAMILIES)}", text)
        kw["family"] = fam
        kw["df"] = _number(d, "df", path, text, default=5.0, cond=lambda x: x > 2, what="must be > 2")
        var = d.get("variance", {"rule": "constant", "scale": 1.0})
        if isinstance(var, (int, float)) and not isinstance(var, bool):
            var = {"rule": "constant", "scale": var}
        if not isinstance(var, dict):
            _fail(f"{path}variance", "expected an object or a number", text)
        rule = var.get("rule", "constant")
        if rule not in VARIANCE_FORMS:
            _fail(f"{path}variance.rule", f"must be one of {list(VARIANCE_FORMS)}", text)
        scale = _number(var, "scale", f"{path}variance.", text, default=1.0,
                        cond=lambda x: x >= 0, what="must be >= 0")
        rate = _number(var, "rate", f"{path}variance.", text, default=1.0,
                       cond=lambda x: rule != "geometric" or x > 0, what="must be > 0")
        kw["variance"] = VarianceRule(rule, scale, rate)
        if fam in NEGATIVE_CONTROL_FAMILIES and not neg:
            _fail(f"{path}family", "infinite-variance family requires negative_control: true", text)
    if kind == MA_ASSOC:
        coefs = d.get("coefficients")
        if (not isinstance(coefs, list) or not coefs
                or not all(isinstance(a, (int, float)) and not isinstance(a, bool) for a in coefs)):
            _fail(f"{path}coefficients", "expected a nonempty list of numbers", text)
        kw["coefficients"] = tuple(float(a) for a in coefs)
    if kind == GAUSSIAN_ASSOC:
        cov = d.get("covariance")
        if not isinstance(cov, dict):
            _fail(f"{path}covariance", "expected an object", text)
        rule = cov.get("rule", "ar1")
        if rule == "ar1":
            kw["covariance"] = "ar1"
            kw["phi"] = _number(cov, "phi", f"{path}covariance.", text,
                                cond=lambda x: -1 < x < 1, what="must lie in (-1, 1)")
            kw["innovation_variance"] = _number(cov, "innovation_variance", f"{path}covariance.", text,
                                                default=1.0, cond=lambda x: x > 0, what="must be > 0")
        elif rule == "matrix":
            m = cov.get("matrix")
            try:
                arr = np.asarray(m, dtype=float)
            except (TypeError, ValueError):
                arr = None
            if arr is None or arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                _fail(f"{path}covariance.matrix", "expected a square list of lists of numbers", text)
            kw["covariance"] = "matrix"
            kw["matrix"] = tuple(tuple(row) for row in arr.tolist())
        else:
            _fail(f"{path}covariance.rule", "must be 'ar1' or 'matrix'", text)
    try:
        return SequenceModel(kind=kind, **kw)
    except ModelSchemaError as exc:
        raise ModelSchemaError(f"field '{path.rstrip('.') or kind}': {exc}") from None


def model_to_dict(model: SequenceModel) -> dict[str, Any]:
    d: dict[str, Any] = {"kind": model.kind}
    if model.name:
        d["name"] = model.name
    if model.kind in (INDEPENDENT, MA_ASSOC):
        d["family"] = model.family
        d["variance"] = {"rule": model.variance.form, "scale": model.variance.scale,
                         "rate": model.variance.rate}
        if model.family == "student_t":
            d["df"] = model.df
    if model.kind == MA_ASSOC:
        d["coefficients"] = list(model.coefficients)
    if model.kind == GAUSSIAN_ASSOC:
        if model.covariance == "ar1":
            d["covariance"] = {"rule": "ar1", "phi": model.phi,
                               "innovation_variance": model.innovation_variance}
        else:
            d["covariance"] = {"rule": "matrix", "matrix": [list(r) for r in model.matrix]}
    if model.negative_control:
        d["negative_control"] = True
    return d


def load_model(path: str | Path) -> SequenceModel:
    """Read a model description file; schema violations name the line and field."""
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelSchemaError(f"{path}: line {exc.lineno}: invalid JSON: {exc.msg}") from None
    try:
        return model_from_dict(d, text)
    except ModelSchemaError as exc:
        raise ModelSchemaError(f"{path}: {exc}") from None
