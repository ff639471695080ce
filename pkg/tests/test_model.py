from pathlib import Path

import pytest

from conftest import FIXTURES, INVALID
from hybridid.errors import PlanError, ValidationError
from hybridid.model import from_dict, load_diagram, parse_diagram, plan_elimination, serialize
from hybridid.solver import solve

MINIMAL = Path(__file__).resolve().parent / "valid" / "minimal.yaml"

# fixture -> fragment the first problem message must contain
INVALID_CASES = {
    "cycle": "cycle A -> B -> A",
    "decision_without_utility": "decision E is not in the domain of any utility",
    "missing_potential": "chance variable X has no potential",
    "unknown_variable": "unknown variable 'Q'",
    "domain_mismatch": "refers to ['X']",
    "syntax_error": "syntax error",
    "untruncated_density": "need mop",
    "continuous_decision_in_density": "continuous decision P in the domain of a density",
    "constraint_order": "D1 is not observed before decision D2",
    "wrong_format": "expected format: 1",
    "bad_mixture": "mixture probabilities sum to 0.9",
}


@pytest.mark.parametrize("case", sorted(INVALID_CASES))
def test_invalid_fixture_is_rejected(case):
    with pytest.raises(ValidationError) as info:
        load_diagram(INVALID / f"{case}.yaml")
    problems = info.value.problems
    assert problems
    assert INVALID_CASES[case] in problems[0][1]


def test_every_invalid_fixture_has_a_case():
    assert {p.stem for p in INVALID.glob("*.yaml")} == set(INVALID_CASES)


def test_syntax_error_reports_line():
    with pytest.raises(ValidationError) as info:
        load_diagram(INVALID / "syntax_error.yaml")
    assert info.value.problems[0][0] == "line 5"


def test_minimal_diagram_solves():
    d = load_diagram(MINIMAL)
    s = solve(d)
    assert s.root_value == pytest.approx(1.0, abs=1e-12)
    assert s["D"].act({}) == "a"


def test_ties_go_to_first_alternative():
    d = from_dict({
        "format": 1, "name": "tie",
        "variables": {"D": {"kind": "decision-discrete", "states": ["a", "b"]}},
        "utilities": {"u": {"domain": ["D"], "table": [{"when": {"D": "a"}, "value": 2},
                                                      {"when": {"D": "b"}, "value": 2}]}},
        "information": [["D"]],
    })
    assert solve(d)["D"].act({}) == "a"


def test_entrepreneur_shape(entrepreneur):
    assert len(entrepreneur.variables) == 7
    assert entrepreneur.decisions == ["P"]
    assert entrepreneur.information[0] == ("P",)
    assert set(entrepreneur.utilities) == {"profit"}


def test_put_shape(put_option):
    assert put_option.decisions == ["D1", "D2", "D3"]
    assert put_option.variables["D2"].constraint is not None


@pytest.mark.parametrize("name", ["entrepreneur", "put_option"])
def test_round_trip(name):
    d = load_diagram(FIXTURES / f"{name}.yaml")
    text = serialize(d)
    again = parse_diagram(text)
    assert again.structurally_equal(d)
    assert serialize(again) == text


def test_non_mapping_document():
    with pytest.raises(ValidationError):
        parse_diagram("- just\n- a list\n")


def test_entrepreneur_plan(entrepreneur):
    plan = plan_elimination(entrepreneur)
    assert plan.order[-1] == "P"
    assert plan_elimination(entrepreneur, plan.order).order == plan.order


def test_order_violating_information_is_rejected(entrepreneur):
    order = ["P", "Ca", "Z2", "Cn", "Qa", "Z1", "Qn"]
    with pytest.raises(PlanError, match="P is eliminated before Ca"):
        plan_elimination(entrepreneur, order)


def test_deterministic_child_must_go_first(entrepreneur):
    order = ["Ca", "Z2", "Cn", "Z1", "Qa", "Qn", "P"]
    with pytest.raises(PlanError, match="Z1 is eliminated before its deterministic child Qa"):
        plan_elimination(entrepreneur, order)


def test_order_must_be_complete(entrepreneur):
    with pytest.raises(PlanError, match="missing"):
        plan_elimination(entrepreneur, ["P"])


def test_put_plan(put_option):
    order = ["D3", "L3", "W3", "D2", "L2", "W2", "D1", "L1"]
    plan = plan_elimination(put_option, order)
    assert plan.order == tuple(order)
    assert len(plan.fused) == len(order)
    with pytest.raises(PlanError):
        plan_elimination(put_option, ["L3", "D3", "W3", "D2", "L2", "W2", "D1", "L1"])
