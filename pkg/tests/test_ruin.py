import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from movingclt.errors import ModelSchemaError, PreconditionError
from movingclt.model import SequenceModel, VarianceRule
from movingclt.ruin import (BrownianSurrogate, SurplusModel, claim_moments, load_scenario,
                            ruin_probability, ruin_time, scenario_from_dict, scenario_to_dict,
                            simulate_surplus)

NO_NOISE = SequenceModel.independent("normal", 0.0)


def compound():
    claims = SequenceModel.independent("uniform", 1 / 3)
    return SurplusModel(u=30, c=52, t0=1, claims=claims, claim_mean=1.0, count="poisson", rate=50)


def test_zero_claims_path():
    path = simulate_surplus(SurplusModel(u=5, c=2, t0=0.5, claims=NO_NOISE), 6, seed=0)
    assert path.tolist() == [5 + 2 * 0.5 * n for n in range(1, 7)]
    assert np.all(np.diff(path) > 0)


def test_deterministic_claims_path():
    path = simulate_surplus(SurplusModel(u=10, c=0, t0=1, claims=NO_NOISE, claim_mean=3), 5, seed=0)
    assert path.tolist() == [7, 4, 1, -2, -5]
    assert ruin_time(path) == 4


def test_ruin_time_examples():
    assert ruin_time([7, 4, 1, -2]) == 4
    assert ruin_time([1, 2, 3]) is None
    assert ruin_time([0.0, 0.0]) is None
    with pytest.raises(PreconditionError):
        ruin_time([])


def test_poisson_claim_total_mean():
    m = compound()
    N, R = 20, 3000
    totals = np.array([m.u + m.c * N * m.t0 - simulate_surplus(m, N, seed=4, replicate=r)[-1]
                       for r in range(R)])
    expected = m.rate * N * m.t0 * m.claim_mean
    assert abs(totals.mean() - expected) <= 3 * totals.std(ddof=1) / math.sqrt(R)
    mean, var = claim_moments(m, N)
    assert mean[-1] == pytest.approx(expected)
    # compound Poisson: Var = lambda N t0 E[claim^2]
    assert var[-1] == pytest.approx(m.rate * N * (1 / 3 + 1.0), rel=1e-9)
    assert abs(totals.var(ddof=1) - var[-1]) <= 0.1 * var[-1]


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**63), du=st.floats(0.01, 50), rep=st.integers(0, 1000))
def test_raising_u_never_hastens_ruin(seed, du, rep):
    base = SurplusModel(u=2, c=1, t0=1, claims=SequenceModel.independent("laplace", 4.0), claim_mean=1)
    richer = SurplusModel(u=2 + du, c=1, t0=1, claims=base.claims, claim_mean=1)
    a = ruin_time(simulate_surplus(base, 40, seed, rep))
    b = ruin_time(simulate_surplus(richer, 40, seed, rep))
    assert b is None or (a is not None and b >= a)


def test_ruin_probability_monotone_in_u_and_c():
    claims = SequenceModel.independent("normal", 4.0)
    ps = [float(ruin_probability(SurplusModel(u=u, c=c, t0=1, claims=claims, claim_mean=1), 30, 500, seed=3))
          for u, c in ((0, 1), (2, 1), (2, 1.3), (6, 1.3))]
    assert ps == sorted(ps, reverse=True)


def test_ruin_probability_large_capital():
    m = SurplusModel(u=1e6, c=0, t0=1, claims=SequenceModel.independent("uniform", 1.0), claim_mean=2)
    assert float(ruin_probability(m, 50, 200, seed=1)) == 0.0


def test_symmetric_one_period():
    m = SurplusModel(u=0, c=0, t0=1, claims=SequenceModel.independent("laplace"))
    R = 4000
    p = ruin_probability(m, 1, R, seed=8)
    assert abs(float(p) - 0.5) <= 3 * math.sqrt(0.25 / R)
    assert p.stderr == pytest.approx(math.sqrt(float(p) * (1 - float(p)) / R))


def test_brownian_surrogate_covariance():
    m = SurplusModel(u=1, c=1, t0=1, claims=SequenceModel.independent("normal", VarianceRule("linear", 1.0)))
    sur = BrownianSurrogate.build(m, 10)
    assert sur.a[-1] == pytest.approx(1.0)
    assert np.all(np.diff(sur.a) >= 0)
    C = sur.covariance()
    assert C[3, 7] == sur.a[3] and C[7, 3] == sur.a[3]
    # the surrogate's own finite-dimensional covariance matches a(t_i) ^ a(t_j)
    from movingclt.ruin import brownian_surplus
    R = 4000
    w = np.array([(m.u + m.c * np.arange(1, 11) - brownian_surplus(m, 10, 5, r, surrogate=sur)) / sur.s_N
                  for r in range(R)])
    assert np.max(np.abs(w.T @ w / R - C)) <= 0.06


def test_brownian_rejects_decreasing_scaling():
    m = SurplusModel(u=1, c=1, t0=1, claims=SequenceModel.independent("normal"))
    with pytest.raises(PreconditionError):
        BrownianSurrogate.build(m, 5, scaling=lambda t: 1 - t)


def test_compound_scenario_methods_agree():
    m = compound()
    exact = ruin_probability(m, 20, 10**4, seed=11, method="exact-sim")
    approx = ruin_probability(m, 20, 10**4, seed=11, method="brownian-approx")
    assert abs(float(exact) - float(approx)) <= 0.05


def test_ruin_preconditions():
    m = compound()
    with pytest.raises(PreconditionError):
        ruin_probability(m, 5, 99, seed=0)
    with pytest.raises(PreconditionError):
        ruin_probability(m, 5, 100, seed=0, method="fluid")
    with pytest.raises(PreconditionError):
        SurplusModel(u=-1, c=0, t0=1, claims=NO_NOISE)
    with pytest.raises(PreconditionError):
        SurplusModel(u=0, c=0, t0=1, claims=NO_NOISE, count="poisson", rate=0)


def test_scenario_roundtrip(tmp_path):
    m = compound()
    d = scenario_to_dict(m, 20)
    f = tmp_path / "s.json"
    f.write_text(json.dumps(d))
    assert load_scenario(f) == (m, 20)
    bad = dict(d, horizon=0)
    with pytest.raises(ModelSchemaError):
        scenario_from_dict(bad)
    with pytest.raises(ModelSchemaError):
        scenario_from_dict(dict(d, count={"process": "hawkes"}))
