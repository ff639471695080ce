import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridid.distributions import (DistributionSpec, lognormal_value_mop, normal_mop,
                                    std_normal_mop, taylor_curve)
from hybridid.mop import MOP, integrate_out, multiply

# dense-grid oracle values (independent numpy Taylor sums, 10^5 points per piece)
EXP_3PIECE_SUP_ERR = 0.016171885709084677
QN_SUP_ERR = 17.153548889591207
PUT_EXP_SUP_ERR = 0.014561191201940105
TRUNC_NORMAL_M2 = 0.9733369246625416


def moment(m: MOP, k: int) -> float:
    (v,) = m.scope
    xk = MOP.from_pieces((v,), [({}, {(k,): 1.0})])
    r = integrate_out(multiply(m, xk), v)
    return r.scalar() if r.pieces else 0.0


def test_std_normal_shape():
    phi = std_normal_mop()
    assert len(phi.pieces) == 6 and phi.degree() == 3
    assert phi.support_hull()["z"] == (-3.0, 3.0)
    assert moment(phi, 0) == pytest.approx(1.0, abs=1e-12)
    assert abs(moment(phi, 1)) < 1e-14
    m2 = moment(phi, 2)
    assert 0.95 <= m2 <= 1.01
    assert m2 == pytest.approx(TRUNC_NORMAL_M2, abs=2e-3)


def test_normal_is_affine_image():
    assert normal_mop(0, 1, "z").structurally_equal(std_normal_mop())
    mu, var = 0.00074, 0.13229 ** 2
    m = normal_mop(mu, var, "w")
    assert moment(m, 0) == pytest.approx(1.0, abs=1e-12)
    assert moment(m, 1) == pytest.approx(mu, abs=1e-6)
    s = math.sqrt(var)
    xs = np.random.default_rng(0).uniform(mu - 3.5 * s, mu + 3.5 * s, 500)
    want = std_normal_mop().evaluate(z=(xs - mu) / s) / s
    assert np.allclose(m.evaluate(w=xs), want, rtol=1e-12, atol=1e-12)


RECIPES = [(6, 3, (-3.0, 3.0)), (10, 3, (-3.0, 3.0)), (8, 4, (-3.5, 3.5)),
           (10, 3, (-4.0, 4.0)), (12, 3, (-3.5, 3.5))]


@given(st.floats(-5, 5), st.floats(0.01, 9), st.sampled_from(RECIPES))
def test_density_invariants(mu, var, recipe):
    pieces, degree, trunc = recipe
    m = normal_mop(mu, var, "x", pieces=pieces, degree=degree, truncation=trunc)
    s = math.sqrt(var)
    xs = np.random.default_rng(1).uniform(mu - 5 * s, mu + 5 * s, 10_000)
    assert m.evaluate(x=xs).min() >= -1e-9
    assert moment(m, 0) == pytest.approx(1.0, abs=1e-12)


def test_negative_recipes_rejected():
    with pytest.raises(ValueError, match="negative"):
        std_normal_mop(6, 3, (-4.0, 4.0))
    with pytest.raises(ValueError, match="negative"):
        DistributionSpec("normal", 0, 1, (-4, 4), pieces=6)


def test_spec_rejects_bad_recipes():
    with pytest.raises(ValueError):
        DistributionSpec("normal", 0, 1, (-2, 2))
    with pytest.raises(ValueError):
        DistributionSpec("normal", 0, 1, (-3, 3), pieces=1)
    with pytest.raises(ValueError):
        DistributionSpec("normal", 0, 0)
    with pytest.raises(ValueError):
        DistributionSpec("lognormal", 0, 1).mop("x")


def test_sampling_is_seeded():
    spec = DistributionSpec("lognormal", math.log(40), 0.13229 ** 2)
    a = spec.sample(np.random.default_rng(3), 1000)
    b = spec.sample(np.random.default_rng(3), 1000)
    assert np.array_equal(a, b) and a.min() > 0


def _sup_err(m, f, lo, hi):
    xs = np.linspace(lo, hi, 300_001)[:-1]
    return float(np.max(np.abs(m.evaluate(**{m.scope[0]: xs}) - f(xs))))


def test_exp_approximation_error():
    a, b = math.log(15), math.log(80)
    e = np.linspace(a, b, 4)
    pieces = [(lo, hi, 0.5 * (lo + hi)) for lo, hi in zip(e[:-1], e[1:])]
    m = lognormal_value_mop("l", pieces)
    c = pieces[1][2]
    assert m(l=c) == pytest.approx(math.exp(c), rel=1e-15)
    err = _sup_err(m, np.exp, a, b)
    assert err <= EXP_3PIECE_SUP_ERR * (1 + 1e-6)
    assert err == pytest.approx(EXP_3PIECE_SUP_ERR, rel=1e-3)


def test_taylor_curve_demand_error():
    m = taylor_curve("80*(log(50) - log(P))", "P", [(1, 7, 4), (7, 21, 14), (21, 47, 34)], 3)
    err = _sup_err(m, lambda p: 80 * (math.log(50) - np.log(p)), 1, 47)
    assert err == pytest.approx(QN_SUP_ERR, rel=1e-3)


def test_exercise_utility_at_thirty(put_option):
    r, dt = 0.0488, 0.1944
    u = put_option.utilities["pi1"].weight({"D1": "e1"})
    want = math.exp(-r * dt) * (35 - 30)
    assert u(L1=math.log(30)) == pytest.approx(want, abs=PUT_EXP_SUP_ERR)
