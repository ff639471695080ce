import itertools

import numpy as np
import pytest
from scipy import integrate

from hybridid.distributions import std_normal_mop
from hybridid.errors import ParametricMaximizationError, PlanError, SolveError
from hybridid.model import from_dict, plan_elimination
from hybridid.oracle import constant_decision, perturb
from hybridid.solver import evaluate_strategy, solve, with_decisions

TRIANGLES = [
    {"when": {"S": "lo"}, "mop": {"pieces": [{"bounds": {"X": [0, 1]}, "poly": "2 - 2*X"}]}},
    {"when": {"S": "hi"}, "mop": {"pieces": [{"bounds": {"X": [0, 1]}, "poly": "2*X"}]}},
]


def _vars(**kinds):
    return {k: ({"kind": v[0], "states": list(v[1:])} if len(v) > 1 else {"kind": v[0]})
            for k, v in kinds.items()}


def one_shot():
    return {
        "format": 1, "name": "one-shot",
        "variables": _vars(D=("decision-discrete", "go", "stop"), S=("chance-discrete", "lo", "hi"),
                           X=("chance-continuous",)),
        "potentials": {"S": {"type": "discrete", "table": [{"when": {}, "probs": [0.3, 0.7]}]},
                       "X": {"type": "density", "parents": ["S"], "table": TRIANGLES}},
        "utilities": {"u": {"domain": ["D", "S", "X"], "table": [
            {"when": {"D": "go", "S": "lo"}, "value": "X - 1"},
            {"when": {"D": "go", "S": "hi"}, "value": "3*X**2"},
            {"when": {"D": "stop", "S": "lo"}, "value": 0.5},
            {"when": {"D": "stop", "S": "hi"}, "value": 0.5}]}},
        "information": [["D"], ["S", "X"]],
    }


def observed_signal():
    t_rows = [{"when": r["when"], "mop": {"pieces": [
        {"bounds": {"T": [0, 1]}, "poly": r["mop"]["pieces"][0]["poly"].replace("X", "T")}]}}
        for r in TRIANGLES]
    return {
        "format": 1, "name": "observed-signal",
        "variables": _vars(D=("decision-discrete", "a", "b"), S=("chance-discrete", "lo", "hi"),
                           T=("chance-continuous",), N=("chance-continuous",),
                           Y=("chance-deterministic",)),
        "potentials": {
            "S": {"type": "discrete", "table": [{"when": {}, "probs": [0.4, 0.6]}]},
            "T": {"type": "density", "parents": ["S"], "table": t_rows},
            "N": {"type": "normal", "mean": 0, "variance": 0.25,
                  "mop": {"pieces": 6, "degree": 3, "truncation": [-3, 3]}},
            "Y": {"type": "deterministic", "parents": ["N", "S"], "table": [
                {"when": {"S": "lo"}, "function": "N - 1"},
                {"when": {"S": "hi"}, "function": "2*N + 1"}]}},
        "utilities": {"u": {"domain": ["D", "Y"], "table": [
            {"when": {"D": "a"}, "value": "Y**2"}, {"when": {"D": "b"}, "value": "Y + 1.2"}]}},
        "information": [["T"], ["D"], ["S", "N", "Y"]],
    }


def test_before_acting():
    return {
        "format": 1, "name": "test-first",
        "variables": _vars(D1=("decision-discrete", "test", "skip"),
                           R=("chance-discrete", "pos", "neg", "none"),
                           D2=("decision-discrete", "go", "stop"),
                           S=("chance-discrete", "lo", "hi"), X=("chance-continuous",)),
        "potentials": {
            "S": {"type": "discrete", "table": [{"when": {}, "probs": [0.5, 0.5]}]},
            "R": {"type": "discrete", "parents": ["D1", "S"], "table": [
                {"when": {"D1": "test", "S": "lo"}, "probs": [0.2, 0.8, 0]},
                {"when": {"D1": "test", "S": "hi"}, "probs": [0.9, 0.1, 0]},
                {"when": {"D1": "skip", "S": "lo"}, "probs": [0, 0, 1]},
                {"when": {"D1": "skip", "S": "hi"}, "probs": [0, 0, 1]}]},
            "X": {"type": "density", "parents": ["S"], "table": TRIANGLES}},
        "utilities": {
            "cost": {"domain": ["D1"], "table": [{"when": {"D1": "test"}, "value": -0.1},
                                                 {"when": {"D1": "skip"}, "value": 0}]},
            "u": {"domain": ["D2", "S", "X"], "table": [
                {"when": {"D2": "go", "S": "lo"}, "value": "4*X - 2"},
                {"when": {"D2": "go", "S": "hi"}, "value": "3*X**2"},
                {"when": {"D2": "stop", "S": "lo"}, "value": 0},
                {"when": {"D2": "stop", "S": "hi"}, "value": 0}]}},
        "information": [["D1"], ["R"], ["D2"], ["S", "X"]],
    }


test_before_acting.__test__ = False


def valid_orders(d):
    groups = [list(g) for g in reversed(d.information)]
    for combo in itertools.product(*[itertools.permutations(g) for g in groups]):
        order = [x for g in combo for x in g]
        try:
            plan_elimination(d, order)
        except PlanError:
            continue
        yield order


def _signal_oracle():
    # E[N^2] of the MOP noise by quadrature, then the observed-signal value in closed form
    phi = std_normal_mop()
    var = 0.25 * integrate.quad(lambda z: z * z * phi(z=z), -3, 3, points=phi.breakpoints("z"),
                                epsabs=1e-13)[0]
    a_lo, a_hi = var + 1, 4 * var + 1
    b_lo, b_hi = 0.2, 2.2
    ev = lambda t: max(0.8 * (1 - t) * a_lo + 1.2 * t * a_hi, 0.8 * (1 - t) * b_lo + 1.2 * t * b_hi)
    return integrate.quad(ev, 0, 1, limit=200, epsabs=1e-13)[0]


@pytest.mark.parametrize("build, want", [
    (one_shot, 0.3 * (-2 / 3) + 0.7 * 1.5),
    (observed_signal, None),
    (test_before_acting, 0.1 * (-2 / 3) + 0.45 * 1.5 - 0.1),
])
def test_value_is_order_independent(build, want):
    d = from_dict(build())
    if want is None:
        want = _signal_oracle()
    values = []
    for order in valid_orders(d):
        try:
            values.append(solve(d, order=order).root_value)
        except SolveError:
            continue
    assert values
    assert np.allclose(values, want, rtol=0, atol=1e-6)


def test_division_closure_depends_on_order():
    d = from_dict(test_before_acting())
    with pytest.raises(SolveError) as info:
        solve(d, order=["S", "X", "D2", "R", "D1"])
    assert (info.value.step, info.value.variable) == (0, "S")
    assert "division-free form" in str(info.value)
    s = solve(d, order=["X", "S", "D2", "R", "D1"])
    assert s["D1"].act({}) == "test"
    assert s["D2"].act({"D1": "test", "R": "neg"}) == "stop"
    assert s["D2"].act({"D1": "test", "R": "pos"}) == "go"


@pytest.mark.parametrize("build", [one_shot, observed_signal])
def test_shortcut_matches_division(build):
    d = from_dict(build())
    for order in valid_orders(d):
        try:
            slow = solve(d, order=order, allow_shortcut=False).root_value
        except SolveError:
            continue
        assert solve(d, order=order).root_value == pytest.approx(slow, abs=1e-9)


@pytest.mark.parametrize("name", ["entrepreneur", "put_option"])
def test_fixture_shortcut_matches_division(name, request):
    d = request.getfixturevalue(name)
    fast = solve(d).root_value
    assert solve(d, allow_shortcut=False).root_value == pytest.approx(fast, abs=1e-9)


def test_entrepreneur_chance_orders_agree(entrepreneur, entrepreneur_strategy):
    order = ["Ca", "Cn", "Z2", "Qa", "Z1", "Qn", "P"]
    assert solve(entrepreneur, order=order).root_value == pytest.approx(
        entrepreneur_strategy.root_value, abs=1e-6)


def test_evaluate_own_strategy(entrepreneur, entrepreneur_strategy):
    v = evaluate_strategy(entrepreneur, entrepreneur_strategy)
    assert v == pytest.approx(entrepreneur_strategy.root_value, abs=1e-6)


def test_evaluate_own_strategy_put(put_option, put_strategy):
    v = evaluate_strategy(put_option, put_strategy)
    assert v == pytest.approx(put_strategy.root_value, abs=1e-6)


def test_pinned_price_is_worse(entrepreneur, entrepreneur_strategy):
    s = with_decisions(entrepreneur_strategy, P=constant_decision("P", 24.10))
    v = evaluate_strategy(entrepreneur, s)
    assert v < entrepreneur_strategy.root_value
    assert v > entrepreneur_strategy.root_value - 5


def test_perturbations_do_not_improve(entrepreneur, entrepreneur_strategy):
    rng = np.random.default_rng(11)
    root = entrepreneur_strategy.root_value
    for _ in range(5):
        s = perturb(entrepreneur, entrepreneur_strategy, rng)
        assert evaluate_strategy(entrepreneur, s) <= root + 1e-9


def test_continuous_decision_after_continuous_observation():
    d = from_dict({
        "format": 1, "name": "parametric",
        "variables": {"X": {"kind": "chance-continuous"},
                      "P": {"kind": "decision-continuous", "interval": [0, 2]}},
        "potentials": {"X": {"type": "density",
                             "mop": {"pieces": [{"bounds": {"X": [0, 1]}, "poly": 1}]}}},
        "utilities": {"u": {"domain": ["P", "X"], "value": "P*X - P**2"}},
        "information": [["X"], ["P"]],
    })
    with pytest.raises(SolveError) as info:
        solve(d)
    assert info.value.variable == "P" and info.value.step == 0
    assert isinstance(info.value.cause, ParametricMaximizationError)


def test_step_records(entrepreneur_strategy):
    recs = entrepreneur_strategy.diagnostics
    assert [r.variable for r in recs][-1] == "P"
    assert recs[-1].kind == "decision"
    assert all(r.pieces_out >= 0 for r in recs)
