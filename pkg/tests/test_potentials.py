import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import close, mops
from hybridid.distributions import normal_mop
from hybridid.errors import DivisionNotClosed, PotentialError
from hybridid.mop import MOP, substitute
from hybridid.potentials import (Mixed, Potential, PotKind, combine_mixed, combine_mul,
                                 combine_utility, divide, integrate, marginalize_chance,
                                 marginalize_mixed_chance, marginalize_mixed_decision, sum_out)
from hybridid.variables import DecisionConstraint

AB = ("a1", "a2")


def uni(var, *pieces):
    return MOP.univariate(var, pieces)


def values(p: Potential, points, configs):
    """Evaluate every entry of ``p`` at ``points`` for the listed configurations."""
    out = []
    for asg in configs:
        m = p.weight({n: asg[n] for n in p.discrete})
        out.append(m.evaluate({v: points[v] for v in m.scope}) if m.scope
                   else np.full(len(points["x"]), m.scalar() if m.pieces else 0.0))
    return np.array(out)


CONFIGS = [{"A": a, "B": b} for a in AB for b in ("b1", "b2")]
PTS = {v: np.random.default_rng(7).uniform(-2.5, 2.5, 60) for v in ("x", "y")}


def mixed_strategy():
    disc = mops(("x",), max_cells=2)
    cont = mops(("x", "y"), max_cells=2, max_degree=2)

    @st.composite
    def build(draw):
        a = Potential.from_mops(PotKind.DISCRETE, {"A": AB}, {"x"},
                                {(s,): draw(disc) for s in [("a1"), ("a2")]})
        z = Potential.from_mops(PotKind.CONTINUOUS, {"B": ("b1", "b2")}, {"x", "y"},
                                {(s,): draw(cont) for s in ("b1", "b2")})
        v = Potential.from_mops(PotKind.UTILITY, {"A": AB}, {"y"},
                                {(s,): draw(mops(("y",))) for s in AB})
        return Mixed(a, z, v)
    return build()


def same_mixed(m1: Mixed, m2: Mixed) -> bool:
    return all(close(values(p, PTS, CONFIGS), values(q, PTS, CONFIGS))
               for p, q in ((m1.disc, m2.disc), (m1.cont, m2.cont), (m1.util, m2.util)))


# -- combination ------------------------------------------------------------------

@given(mixed_strategy(), mixed_strategy())
def test_combination_commutes(m1, m2):
    assert same_mixed(combine_mixed(m1, m2), combine_mixed(m2, m1))


@given(mixed_strategy(), mixed_strategy(), mixed_strategy())
def test_combination_associates(m1, m2, m3):
    left = combine_mixed(combine_mixed(m1, m2), m3)
    right = combine_mixed(m1, combine_mixed(m2, m3))
    assert same_mixed(left, right)


@given(mixed_strategy())
def test_unit_laws(m):
    one = Mixed.identity()
    for r in (combine_mixed(m, one), combine_mixed(one, m)):
        assert r.disc.structurally_equal(m.disc)
        assert r.cont.structurally_equal(m.cont)
        assert r.util.structurally_equal(m.util)


def test_three_parts_combine_into_triple():
    a = Potential.from_mops(PotKind.DISCRETE, {"A": AB}, (), {("a1",): MOP.constant(0.3),
                                                             ("a2",): MOP.constant(0.7)})
    z = Potential.from_mops(PotKind.CONTINUOUS, {}, {"x"}, {(): normal_mop(0, 1, "x")})
    v = Potential.from_mops(PotKind.UTILITY, {}, {"x"}, {(): uni("x", (-1, 1, [0, 1]))})
    mu = combine_mixed(combine_mixed(Mixed.wrap(a), Mixed.wrap(z)), Mixed.wrap(v))
    assert mu.disc is a and mu.cont is z and mu.util is v


def test_utility_addition_over_joint_configurations():
    v1 = Potential.from_mops(PotKind.UTILITY, {"A": AB}, {"x"},
                             {("a1",): uni("x", (0, 1, [1])), ("a2",): MOP.zero(("x",))})
    v2 = Potential.from_mops(PotKind.UTILITY, {"B": ("b1", "b2")}, {"y"},
                             {("b1",): uni("y", (0, 1, [0, 2])), ("b2",): MOP.constant(3.0)})
    s = combine_utility(v1, v2)
    for c in CONFIGS:
        want = values(v1, PTS, [c])[0] + values(v2, PTS, [c])[0]
        assert close(values(s, PTS, [c])[0], want)
    assert combine_utility(v1, Potential.identity(PotKind.UTILITY)) is v1


def test_two_utilities_do_not_multiply():
    u = Potential.identity(PotKind.UTILITY)
    with pytest.raises(PotentialError):
        combine_mul(u, u)


# -- marginalization --------------------------------------------------------------

def test_sum_over_single_state_is_projection():
    p = Potential.from_mops(PotKind.DISCRETE, {"A": ("only",), "B": ("b1", "b2")}, (),
                            {("only", "b1"): MOP.constant(0.4), ("only", "b2"): MOP.constant(0.6)})
    r = sum_out(p, "A")
    assert r.discrete == ("B",)
    assert r.value({"B": "b2"}) == pytest.approx(0.6)


@given(mops(("c", "qa"), max_cells=2, max_degree=2), mops(("qa",), max_cells=2, max_degree=1))
def test_sifting_is_substitution(cofactor, g):
    delta = Potential.dirac("c", {}, {(): [(1.0, g)]})
    u = Potential.from_mops(PotKind.UTILITY, {}, {"c", "qa"}, {(): cofactor})
    sifted = integrate(combine_mul(delta, u), "c")
    want = Potential.from_mops(PotKind.UTILITY, {}, {"qa"}, {(): substitute(cofactor, "c", g)})
    assert sifted.structurally_equal(want)


def test_sifting_realizes_cost_substitution():
    # delta(ca - (cn + z2)) against p*qa - ca
    g = MOP.from_pieces(("cn", "z2"), [({}, {(1, 0): 1.0, (0, 1): 1.0})])
    delta = Potential.dirac("ca", {}, {(): [(1.0, g)]})
    u = Potential.from_mops(PotKind.UTILITY, {}, {"ca", "p", "qa"},
                            {(): MOP.from_pieces(("ca", "p", "qa"),
                                                 [({}, {(0, 1, 1): 1.0, (1, 0, 0): -1.0})])})
    r = integrate(combine_mul(delta, u), "ca")
    pts = {v: np.random.default_rng(1).uniform(0, 5, 50) for v in ("cn", "p", "qa", "z2")}
    m = r.weight({})
    assert close(m.evaluate(pts), pts["p"] * pts["qa"] - (pts["cn"] + pts["z2"]))


def test_chance_order_independence():
    # A and X appear in no utility: either order leaves the same mixed potential
    a = Potential.from_mops(PotKind.DISCRETE, {"A": AB}, (), {("a1",): MOP.constant(0.25),
                                                             ("a2",): MOP.constant(0.75)})
    z = Potential.from_mops(PotKind.CONTINUOUS, {"A": AB}, {"x", "y"}, {
        ("a1",): MOP.from_pieces(("x", "y"), [({"x": (0, 1), "y": (0, 1)}, {(0, 0): 1.0})]),
        ("a2",): MOP.from_pieces(("x", "y"), [({"x": (0, 2), "y": (0, 1)}, {(1, 0): 1.0})]),
    })
    v = Potential.from_mops(PotKind.UTILITY, {}, {"y"}, {(): uni("y", (0, 1, [0, 3]))})
    mu = Mixed(a, z, v)
    kw = dict(chance_discrete={"A"}, chance_continuous={"x", "y"})
    one = marginalize_mixed_chance(marginalize_mixed_chance(mu, "A", **kw), "x", **kw)
    two = marginalize_mixed_chance(marginalize_mixed_chance(mu, "x", **kw), "A", **kw)
    assert same_mixed(one, two)


# -- division -----------------------------------------------------------------------

def test_discrete_renormalization():
    a = Potential.from_mops(PotKind.DISCRETE, {"A": AB}, (), {("a1",): MOP.constant(0.2),
                                                             ("a2",): MOP.constant(0.6)})
    m = sum_out(a, "A")
    q = divide(a, m)
    assert q.value({"A": "a1"}) == pytest.approx(0.25)
    assert q.value({"A": "a2"}) == pytest.approx(0.75)


def test_divide_by_ones_is_identity():
    a = Potential.from_mops(PotKind.CONTINUOUS, {}, {"x"}, {(): uni("x", (0, 1, [0, 2]))})
    assert divide(a, Potential.identity(PotKind.CONTINUOUS)).structurally_equal(a)


@given(mops(("x",), max_cells=3, density=True), mops(("x",), max_cells=3, density=True))
def test_division_round_trip(f1, f2):
    a = Potential.from_mops(PotKind.DISCRETE, {"A": AB}, {"x"}, {("a1",): f1, ("a2",): f2})
    m = sum_out(a, "A")
    back = combine_mul(divide(a, m), m)
    confs = [{"A": s} for s in AB]
    nz = values(m, PTS, [{}])[0] != 0
    assert close(values(back, PTS, confs)[:, nz], values(a, PTS, confs)[:, nz])


def test_non_polynomial_quotient_rejected():
    a = Potential.from_mops(PotKind.DISCRETE, {"A": AB}, {"x"},
                            {("a1",): uni("x", (0, 1, [1])), ("a2",): uni("x", (0, 1, [0, 1]))})
    with pytest.raises(DivisionNotClosed):
        divide(a, sum_out(a, "A"))


# -- mixed marginalization ------------------------------------------------------------

@given(mops(("x",), max_cells=3, density=True), mops(("d", "x"), lo=-3, hi=3, max_cells=2))
def test_vacuous_division_matches_shortcut(dens, util):
    from hybridid.mop import normalize
    z = Potential.from_mops(PotKind.CONTINUOUS, {}, {"x"}, {(): normalize(dens, "x")})
    v = Potential.from_mops(PotKind.UTILITY, {}, {"d", "x"}, {(): util})
    mu = Mixed(Potential.identity(PotKind.DISCRETE), z, v)
    kw = dict(chance_discrete=set(), chance_continuous={"x"}, single_utility=False)
    slow = marginalize_mixed_chance(mu, "x", allow_shortcut=False, **kw)
    fast = marginalize_mixed_chance(mu, "x", allow_shortcut=True, **kw)
    pts = {"d": np.linspace(-2.9, 2.9, 101)}
    ws, wf = slow.util.weight({}), fast.util.weight({})
    ev = lambda m: m.evaluate({k: pts[k] for k in m.scope}) if m.scope else \
        np.full(101, m.scalar() if m.pieces else 0.0)
    assert np.allclose(ev(ws), ev(wf), rtol=0, atol=1e-9)


def test_discrete_case_table_with_conditional_divisor():
    # B | A conditional: summing B out gives a vacuous divisor
    a = Potential.from_mops(PotKind.DISCRETE, {"A": AB, "B": ("b1", "b2")}, (), {
        ("a1", "b1"): MOP.constant(0.1), ("a1", "b2"): MOP.constant(0.9),
        ("a2", "b1"): MOP.constant(0.6), ("a2", "b2"): MOP.constant(0.4)})
    v = Potential.from_mops(PotKind.UTILITY, {"B": ("b1", "b2")}, (),
                            {("b1",): MOP.constant(10.0), ("b2",): MOP.constant(-1.0)})
    extra = Potential.from_mops(PotKind.UTILITY, {"A": AB}, (),
                                {("a1",): MOP.constant(1.0), ("a2",): MOP.constant(2.0)})
    mu = Mixed(a, Potential.identity(PotKind.CONTINUOUS), combine_utility(v, extra))
    kw = dict(chance_discrete={"A", "B"}, chance_continuous=set(), single_utility=False)
    r1 = marginalize_mixed_chance(mu, "B", allow_shortcut=False, **kw)
    r2 = marginalize_mixed_chance(mu, "B", allow_shortcut=True, **kw)
    for s, want in (("a1", 0.1 * 10 - 0.9 + 1), ("a2", 0.6 * 10 - 0.4 + 2)):
        assert r1.util.value({"A": s}) == pytest.approx(want, abs=1e-12)
        assert r2.util.value({"A": s}) == pytest.approx(want, abs=1e-12)
    assert r1.disc.value({"A": "a1"}) == pytest.approx(1.0)


def test_probability_conservation():
    a = Potential.from_mops(PotKind.DISCRETE, {"A": AB}, (), {("a1",): MOP.constant(0.3),
                                                             ("a2",): MOP.constant(0.7)})
    z = Potential.from_mops(PotKind.CONTINUOUS, {"A": AB}, {"x"},
                            {("a1",): normal_mop(0, 1, "x"), ("a2",): normal_mop(2, 0.25, "x")})
    y = Potential.dirac("y", {}, {(): [(0.5, MOP.from_pieces(("x",), [({}, {(1,): 1.0})])),
                                       (0.5, MOP.constant(1.0))]})
    mu = combine_mixed(combine_mixed(Mixed.wrap(a), Mixed.wrap(z)), Mixed.wrap(y))
    kw = dict(chance_discrete={"A"}, chance_continuous={"x", "y"})
    for v in ("y", "x", "A"):
        mu = marginalize_mixed_chance(mu, v, **kw)
    total = 1.0
    for part in (mu.disc, mu.cont):
        w = part.weight({})
        total *= w.scalar() if w.pieces else 0.0
    assert total == pytest.approx(1.0, abs=1e-6)


def test_decision_marginalization_cases():
    v = Potential.from_mops(PotKind.UTILITY, {"D": ("e", "h", "n")}, {"s"}, {
        ("e",): uni("s", (0, 35, [35, -1])), ("h",): uni("s", (0, 50, [2])),
        ("n",): MOP.zero(("s",))})
    mu = Mixed(Potential.identity(PotKind.DISCRETE), Potential.identity(PotKind.CONTINUOUS), v)
    out, fn = marginalize_mixed_decision(mu, "D", states=("e", "h", "n"), parent_states={})
    assert fn.rules[()].switch_points()[0][:3] == (pytest.approx(33.0), "e", "h")
    assert out.util.value({"s": 10.0}) == pytest.approx(25.0)
    # constrained alternatives
    c = DecisionConstraint(("P",), {("x",): ("n",), ("y",): ("e", "h")})
    out, fn = marginalize_mixed_decision(mu, "D", states=("e", "h", "n"), constraint=c,
                                         parent_states={"P": ("x", "y")})
    assert fn.rules[("x",)].intervals[0][2] == "n"
    assert out.util.value({"P": "x", "s": 10.0}) == 0.0
