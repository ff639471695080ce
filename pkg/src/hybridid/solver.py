"""Solve influence diagrams by fusion: per plan step, combine the mixed
potentials that mention the variable and marginalize it."""
from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from functools import reduce
from typing import Mapping, Sequence

from hybridid.errors import HybridIDError, PotentialError, SolveError
from hybridid.model import EliminationPlan, InfluenceDiagram, plan_elimination
from hybridid.mop import MOP, Piece, Region
from hybridid.policy import CONSTANT, DecisionFunction, Strategy
from hybridid.polynomial import Polynomial
from hybridid.potentials import (Mixed, Potential, PotKind, combine_mixed,
                                 marginalize_mixed_chance, marginalize_mixed_decision)
from hybridid.variables import VarKind, configurations

__all__ = ["solve", "evaluate_strategy", "Strategy", "DecisionFunction", "StepRecord"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepRecord:
    index: int
    variable: str
    kind: str
    fused: int
    pieces_in: int
    pieces_out: int
    seconds: float = field(default=0.0, compare=False)

    def to_json(self) -> dict:
        return {"step": self.index, "variable": self.variable, "kind": self.kind,
                "fused": self.fused, "pieces_in": self.pieces_in, "pieces_out": self.pieces_out}


def _pieces(mu: Mixed) -> int:
    return sum(len(m.pieces) for part in (mu.disc, mu.cont, mu.util) for m in part.scope_mops())


def _eliminate(diagram: InfluenceDiagram, items: list[Mixed], plan: EliminationPlan,
               allow_shortcut: bool, chance_discrete: set[str], chance_continuous: set[str],
               decisions: Mapping[str, object]):
    single = len(diagram.utilities) == 1
    functions: dict[str, DecisionFunction] = {}
    captures: dict[str, dict] = {}
    records = []
    states = diagram.states()
    for i, x in enumerate(plan.order):
        t0 = time.perf_counter()
        hit = [m for m in items if x in m.domain]
        items = [m for m in items if x not in m.domain]
        var = decisions.get(x)
        kind = "decision" if var is not None else "chance"
        if not hit:
            records.append(StepRecord(i, x, kind, 0, 0, 0))
            continue
        mu = reduce(combine_mixed, hit)
        n_in = _pieces(mu)
        try:
            if var is not None:
                cap: dict = {}
                if var.kind is VarKind.DECISION_DISCRETE:
                    kw = dict(states=var.states, constraint=var.constraint, parent_states=states)
                else:
                    kw = dict(interval=var.interval)
                mu, fn = marginalize_mixed_decision(mu, x, capture=cap, **kw)
                functions[x] = fn
                captures[x] = (fn.variable if fn.form != CONSTANT else x, fn.parents, cap)
            else:
                mu = marginalize_mixed_chance(
                    mu, x, chance_discrete=chance_discrete, chance_continuous=chance_continuous,
                    allow_shortcut=allow_shortcut, single_utility=single)
        except HybridIDError as e:
            raise SolveError(i, x, e) from e
        dt = time.perf_counter() - t0
        rec = StepRecord(i, x, kind, len(hit), n_in, _pieces(mu), dt)
        log.info("step %d %s (%s): fused %d, pieces %d -> %d, %.3fs",
                 i, x, kind, len(hit), n_in, rec.pieces_out, dt)
        records.append(rec)
        if not mu.is_identity():
            items.append(mu)
    final = reduce(combine_mixed, items, Mixed.identity())
    if final.domain:
        raise SolveError(len(plan.order), "-", PotentialError(
            f"variables {sorted(final.domain)} remain after the last step"))
    terms = final.util.table[()]
    root = terms[0].weight.scalar() if terms else 0.0
    return functions, root, tuple(records), captures


def solve(diagram: InfluenceDiagram, plan: EliminationPlan | None = None,
          allow_shortcut: bool = True, order: Sequence[str] | None = None) -> Strategy:
    """Optimal strategy and maximum expected utility."""
    if plan is None:
        plan = plan_elimination(diagram, order)
    items = [Mixed.wrap(p) for p in diagram.potentials.values()]
    items += [Mixed.wrap(u) for u in diagram.utilities.values()]
    decisions = {n: v for n, v in diagram.variables.items() if v.is_decision}
    functions, root, records, captures = _eliminate(
        diagram, items, plan, allow_shortcut, diagram.chance_discrete(),
        diagram.chance_continuous(), decisions)
    return Strategy(functions, root, records, captures)


def _indicator(var: str, intervals, alt: str) -> MOP:
    pieces = [Piece(Region((lo,), (hi,)), Polynomial.constant(1.0, 1))
              for lo, hi, a in intervals if a == alt]
    return MOP((var,), pieces)


def pinned_potential(diagram: InfluenceDiagram, fn: DecisionFunction) -> Potential:
    """The decision function as a conditional of the (now chance) decision."""
    x = fn.decision
    var = diagram.variables[x]
    for p in fn.parents:
        if p not in diagram.variables:
            raise PotentialError(f"decision function for {x} reads unknown variable {p}")
    pstates = {p: diagram.variables[p].states for p in fn.parents}
    configs = list(configurations(fn.parents, pstates))
    missing = [c for c in configs if c not in fn.rules]
    if missing:
        raise PotentialError(f"decision function for {x} has no rule for {missing[0]}")
    if var.kind is VarKind.DECISION_CONTINUOUS:
        table = {c: [(1.0, MOP.constant(fn.rules[c].argmax))] for c in configs}
        order = sorted(fn.parents)
        table = {tuple(dict(zip(fn.parents, c))[n] for n in order): v for c, v in table.items()}
        return Potential.dirac(x, pstates, table)
    states = dict(pstates)
    states[x] = var.states
    names = sorted(states)
    table = {}
    for c in configs:
        rule = fn.rules[c]
        used = {a for _, _, a in rule.intervals} | ({rule.choice} if rule.choice else set())
        bad = used - set(var.states)
        if bad:
            raise PotentialError(f"decision function for {x} uses unknown alternatives {sorted(bad)}")
        for s in var.states:
            asg = dict(zip(fn.parents, c))
            asg[x] = s
            if rule.intervals:
                m = _indicator(fn.variable, rule.intervals, s)
            else:
                m = MOP.constant(1.0) if rule.choice == s else MOP.zero()
            table[tuple(asg[n] for n in names)] = m
    cvars = {fn.variable} if fn.variable else set()
    return Potential.from_mops(PotKind.DISCRETE, states, cvars, table)


def evaluate_strategy(diagram: InfluenceDiagram, strategy: Strategy,
                      plan: EliminationPlan | None = None, allow_shortcut: bool = True) -> float:
    """Expected utility of following ``strategy``: decisions become chance
    variables whose conditionals are the decision functions."""
    if plan is None:
        plan = plan_elimination(diagram)
    variables = dict(diagram.variables)
    potentials = dict(diagram.potentials)
    for x, v in diagram.variables.items():
        if not v.is_decision:
            continue
        if x not in strategy.functions:
            raise PotentialError(f"strategy has no decision function for {x}")
        potentials[x] = pinned_potential(diagram, strategy.functions[x])
        kind = (VarKind.CHANCE_DISCRETE if v.kind is VarKind.DECISION_DISCRETE
                else VarKind.CHANCE_DETERMINISTIC)
        variables[x] = dataclasses.replace(v, kind=kind, constraint=None)
    pinned = dataclasses.replace(diagram, variables=variables, potentials=potentials)
    items = [Mixed.wrap(p) for p in pinned.potentials.values()]
    items += [Mixed.wrap(u) for u in pinned.utilities.values()]
    _, root, _, _ = _eliminate(pinned, items, plan, allow_shortcut, pinned.chance_discrete(),
                               pinned.chance_continuous(), {})
    return root


def with_decisions(strategy: Strategy, **changes: DecisionFunction) -> Strategy:
    functions = dict(strategy.functions)
    functions.update(changes)
    return Strategy(functions, strategy.root_value)
