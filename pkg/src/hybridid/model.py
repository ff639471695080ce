"""Influence diagrams: the YAML file format, validation and elimination plans.

Format (``format: 1``)::

    format: 1
    name: example
    constants: {r: 0.05}            # optional, usable in every expression
    variables:
      D: {kind: decision-discrete, states: [a, b]}
      X: {kind: chance-continuous}
      Y: {kind: chance-deterministic}
    potentials:                     # one per chance variable
      X: {type: normal, mean: 0, variance: 1,
          mop: {pieces: 6, degree: 3, truncation: [-3, 3]}}
      Y: {type: deterministic, parents: [X], function: "2*X + 1"}
    utilities:
      u: {domain: [D, Y], table: [{when: {D: a}, value: "Y"}]}
    information: [[D], [X, Y]]

Functions (deterministic conditionals, utility values, probabilities) are
a number, a polynomial expression, ``{expr, taylor: {var, pieces: [[lo, hi,
center], ...], degree}, exact}`` for a piecewise Taylor approximation of a
smooth curve (``exact`` optionally overrides the curve used by the
simulation oracle), or ``{pieces: [{bounds: {var: [lo, hi]}, poly: expr}]}``
for a literal MOP. Bounds accept expressions such as ``log(35)`` or
``inf``.
"""
from __future__ import annotations

import copy
import graphlib
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import sympy as sp
import yaml

from hybridid.distributions import NORMAL, DistributionSpec, taylor_curve
from hybridid.errors import PlanError, ValidationError
from hybridid.mop import MOP, Piece, make_region, multiply
from hybridid.polynomial import Polynomial
from hybridid.potentials import Potential, PotKind, Term
from hybridid.variables import (DecisionConstraint, Display, Variable, VarKind,
                                configurations)

FORMAT_VERSION = 1
_KINDS = {k.value: k for k in VarKind}


class _Problems:
    def __init__(self):
        self.items: list[tuple[str, str]] = []

    def add(self, loc: str, msg: str):
        self.items.append((loc, msg))

    def raise_if_any(self):
        if self.items:
            raise ValidationError(self.items)


class _Local(Exception):
    """A problem found deep in a builder; carries its location."""

    def __init__(self, loc, msg):
        super().__init__(msg)
        self.loc = loc


# ---------------------------------------------------------------------------
# expressions

def _symbols(names: Iterable[str]) -> dict[str, sp.Symbol]:
    return {n: sp.Symbol(n) for n in names}


def _sympify(text, names: Iterable[str], constants: Mapping[str, float], loc: str) -> sp.Expr:
    local = _symbols(names)
    local.update({k: sp.Float(v) for k, v in constants.items()})
    for fn in ("exp", "log", "sqrt", "Max", "Min"):
        local.setdefault(fn, getattr(sp, fn))
    try:
        expr = sp.sympify(text, locals=local, rational=False)
    except (sp.SympifyError, SyntaxError, TypeError) as e:
        raise _Local(loc, f"cannot parse expression {text!r}: {e}") from None
    unknown = sorted(str(s) for s in expr.free_symbols if str(s) not in set(names))
    if unknown:
        raise _Local(loc, f"expression refers to {unknown}, not among {sorted(names)}")
    return expr


def number(x, constants: Mapping[str, float] | None = None, loc: str = "") -> float:
    if isinstance(x, (int, float)):
        return float(x)
    expr = _sympify(str(x), (), constants or {}, loc)
    if expr in (sp.oo, -sp.oo):
        return math.inf if expr == sp.oo else -math.inf
    try:
        return float(expr)
    except TypeError:
        raise _Local(loc, f"{x!r} is not a number") from None


def _poly_mop(expr: sp.Expr, scope: Sequence[str], bounds: Mapping[str, tuple[float, float]] | None,
              loc: str) -> MOP:
    scope = tuple(sorted(scope))
    syms = [sp.Symbol(v) for v in scope]
    try:
        poly = sp.Poly(sp.expand(expr), *syms) if syms else None
    except sp.PolynomialError:
        poly = None
    if syms and (poly is None or not all(c.is_number for c in poly.coeffs())):
        raise _Local(loc, f"{expr} is not a polynomial in {list(scope)}; add a taylor recipe")
    if poly is None:
        try:
            terms = {(): float(expr)}
        except TypeError:
            raise _Local(loc, f"{expr} is not a constant") from None
    else:
        terms = {tuple(int(e) for e in mon): float(c) for mon, c in poly.terms()}
    lo = tuple(float((bounds or {}).get(v, (-math.inf, math.inf))[0]) for v in scope)
    hi = tuple(float((bounds or {}).get(v, (-math.inf, math.inf))[1]) for v in scope)
    region = make_region(lo, hi)
    if region is None:
        raise _Local(loc, f"empty bounds {bounds}")
    p = Polynomial.from_terms(terms, len(scope)).shifted(region.origin())
    return MOP(scope, [Piece(region, p)])


def build_function(spec, variables: Sequence[str], constants: Mapping[str, float], loc: str) -> MOP:
    """MOP for a function declaration over the continuous ``variables``."""
    if isinstance(spec, (int, float)):
        return MOP.constant(float(spec)) if spec else MOP.zero()
    if isinstance(spec, str):
        expr = _sympify(spec, variables, constants, loc)
        used = sorted(str(s) for s in expr.free_symbols)
        return _poly_mop(expr, used, None, loc)
    if not isinstance(spec, Mapping):
        raise _Local(loc, f"unrecognized function declaration {spec!r}")
    if "pieces" in spec and "expr" not in spec:
        pieces = []
        scope: set[str] = set()
        for i, pc in enumerate(spec["pieces"]):
            ploc = f"{loc}.pieces[{i}]"
            bounds = {}
            for v, (a, b) in (pc.get("bounds") or {}).items():
                if v not in variables:
                    raise _Local(ploc, f"bound on unknown variable {v}")
                bounds[v] = (number(a, constants, ploc), number(b, constants, ploc))
                if not bounds[v][0] < bounds[v][1]:
                    raise _Local(ploc, f"empty interval {bounds[v]} for {v}")
            expr = _sympify(str(pc.get("poly", 0)), variables, constants, ploc)
            vs = sorted(set(bounds) | {str(s) for s in expr.free_symbols})
            scope |= set(vs)
            pieces.append(_poly_mop(expr, vs, bounds, ploc))
        out = MOP(tuple(sorted(scope)))
        for m in pieces:
            out = out + m
        return out
    if "expr" in spec:
        expr = _sympify(str(spec["expr"]), variables, constants, loc)
        if "exact" in spec:
            _sympify(str(spec["exact"]), variables, constants, loc + ".exact")
        if "taylor" not in spec:
            used = sorted(str(s) for s in expr.free_symbols)
            return _poly_mop(expr, used, None, loc)
        tay = spec["taylor"]
        var = tay.get("var")
        if var not in variables:
            raise _Local(loc + ".taylor", f"taylor variable {var!r} is not an argument")
        extra = sorted(str(s) for s in expr.free_symbols if str(s) != var)
        if extra:
            raise _Local(loc, f"taylor recipes take one variable; expression also uses {extra}")
        pieces = []
        for i, pc in enumerate(tay.get("pieces", [])):
            ploc = f"{loc}.taylor.pieces[{i}]"
            if len(pc) != 3:
                raise _Local(ploc, "expected [lo, hi, center]")
            a, b, c = (number(x, constants, ploc) for x in pc)
            if not a < b:
                raise _Local(ploc, f"empty interval [{a}, {b})")
            pieces.append((a, b, c))
        if not pieces:
            raise _Local(loc + ".taylor", "no pieces")
        return taylor_curve(expr, var, pieces, int(tay.get("degree", 3)))
    raise _Local(loc, f"unrecognized function declaration keys {sorted(spec)}")


# ---------------------------------------------------------------------------
# diagram

@dataclass
class InfluenceDiagram:
    name: str
    variables: dict[str, Variable]
    parents: dict[str, tuple[str, ...]]
    potentials: dict[str, Potential]
    utilities: dict[str, Potential]
    information: tuple[tuple[str, ...], ...]
    constants: dict[str, float] = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def decisions(self) -> list[str]:
        return [n for g in self.information for n in g if self.variables[n].is_decision]

    def group_of(self, name: str) -> int:
        for i, g in enumerate(self.information):
            if name in g:
                return i
        raise KeyError(name)

    def states(self) -> dict[str, tuple[str, ...]]:
        return {n: v.states for n, v in self.variables.items() if v.is_discrete}

    def chance_discrete(self) -> set[str]:
        return {n for n, v in self.variables.items() if v.kind is VarKind.CHANCE_DISCRETE}

    def chance_continuous(self) -> set[str]:
        return {n for n, v in self.variables.items()
                if v.kind in (VarKind.CHANCE_CONTINUOUS, VarKind.CHANCE_DETERMINISTIC)}

    def dirac_children(self) -> dict[str, set[str]]:
        """Parent -> deterministic children whose function reads it."""
        out: dict[str, set[str]] = {}
        for n, v in self.variables.items():
            if v.kind is VarKind.CHANCE_DETERMINISTIC:
                for par in self.parents.get(n, ()):
                    if self.variables[par].is_continuous:
                        out.setdefault(par, set()).add(n)
        return out

    def structurally_equal(self, other: "InfluenceDiagram") -> bool:
        if (self.name, self.variables, self.parents, self.information) != \
                (other.name, other.variables, other.parents, other.information):
            return False
        for mine, theirs in ((self.potentials, other.potentials), (self.utilities, other.utilities)):
            if set(mine) != set(theirs):
                return False
            if not all(mine[k].structurally_equal(theirs[k]) for k in mine):
                return False
        return True


def _check_keys(d: Mapping, allowed: set[str], loc: str, probs: _Problems):
    for k in d:
        if k not in allowed:
            probs.add(loc, f"unknown key {k!r}")


def _parse_variable(name: str, d: Any, constants, probs: _Problems) -> Variable | None:
    loc = f"variables.{name}"
    if not isinstance(d, Mapping):
        probs.add(loc, "expected a mapping")
        return None
    _check_keys(d, {"kind", "states", "interval", "constraint", "display"}, loc, probs)
    kind = _KINDS.get(d.get("kind"))
    if kind is None:
        probs.add(loc, f"unknown kind {d.get('kind')!r}; expected one of {sorted(_KINDS)}")
        return None
    states: tuple[str, ...] = ()
    interval = None
    if kind in (VarKind.CHANCE_DISCRETE, VarKind.DECISION_DISCRETE):
        states = tuple(str(s) for s in d.get("states") or ())
        if not states:
            probs.add(loc, "discrete variable needs states")
        elif len(set(states)) != len(states):
            probs.add(loc, "duplicate states")
    elif "states" in d:
        probs.add(loc, "continuous variable cannot have states")
    if "interval" in d:
        try:
            a, b = (number(x, constants, loc) for x in d["interval"])
        except _Local as e:
            probs.add(e.loc, str(e))
            a, b = 0.0, 1.0
        if not a < b:
            probs.add(loc, f"interval [{a}, {b}] is empty")
        interval = (a, b)
    if kind is VarKind.DECISION_CONTINUOUS and interval is None:
        probs.add(loc, "continuous decision needs an interval")
    display = None
    if "display" in d:
        dd = d["display"]
        display = Display(str(dd.get("name", name)), str(dd.get("transform", "identity")))
        if display.transform not in ("identity", "exp"):
            probs.add(loc + ".display", f"unknown transform {display.transform!r}")
    constraint = None
    if "constraint" in d:
        if kind is not VarKind.DECISION_DISCRETE:
            probs.add(loc, "only discrete decisions take constraint tables")
        else:
            c = d["constraint"] or {}
            parents = tuple(c.get("parents") or ())
            rows = {}
            for i, row in enumerate(c.get("rows") or ()):
                when = row.get("when") or {}
                key = tuple(str(when.get(p)) for p in parents)
                allowed = tuple(str(s) for s in row.get("allowed") or ())
                bad = [s for s in allowed if s not in states]
                if bad:
                    probs.add(f"{loc}.constraint.rows[{i}]", f"unknown states {bad}")
                rows[key] = allowed
            constraint = DecisionConstraint(parents, rows)
    return Variable(name, kind, states, interval, constraint, display)


class _Builder:
    def __init__(self, variables: Mapping[str, Variable], constants):
        self.variables = variables
        self.constants = constants

    def split(self, names: Sequence[str]):
        disc = [n for n in names if self.variables[n].is_discrete]
        cont = [n for n in names if not self.variables[n].is_discrete]
        return disc, cont

    def rows(self, decl, disc: Sequence[str], loc: str) -> dict[tuple, Any]:
        """Map configurations of ``disc`` to row payloads from a ``table``."""
        out = {}
        for i, row in enumerate(decl.get("table") or ()):
            rloc = f"{loc}.table[{i}]"
            when = row.get("when") or {}
            for k, s in when.items():
                if k not in disc:
                    raise _Local(rloc, f"{k} is not a discrete variable of this potential")
                if str(s) not in self.variables[k].states:
                    raise _Local(rloc, f"{s!r} is not a state of {k}")
            free = [n for n in disc if n not in when]
            states = {n: self.variables[n].states for n in free}
            for combo in configurations(free, states):
                asg = {**{k: str(v) for k, v in when.items()}, **dict(zip(free, combo))}
                out[tuple(asg[n] for n in sorted(disc))] = (row, rloc)
        return out

    def states_of(self, disc):
        return {n: self.variables[n].states for n in disc}

    def chance(self, name: str, decl: Mapping, parents: Sequence[str]) -> Potential:
        loc = f"potentials.{name}"
        var = self.variables[name]
        typ = decl.get("type")
        pdisc, pcont = self.split(parents)
        if typ == NORMAL:
            if parents:
                raise _Local(loc, "normal potentials take no parents; use a deterministic sum "
                                  "with an independent noise variable")
            if var.kind is not VarKind.CHANCE_CONTINUOUS:
                raise _Local(loc, f"normal potential on a {var.kind.value} variable")
            spec = self.distribution(decl, loc)
            return Potential.from_mops(PotKind.CONTINUOUS, {}, {name}, {(): spec.mop(name)})
        if typ == "deterministic":
            if var.kind is not VarKind.CHANCE_DETERMINISTIC:
                raise _Local(loc, f"deterministic potential on a {var.kind.value} variable")
            table = {}
            rows = self.rows(decl, pdisc, loc) if "table" in decl else None
            for config in configurations(sorted(pdisc), self.states_of(pdisc)):
                if rows is None:
                    row, rloc = decl, loc
                elif config in rows:
                    row, rloc = rows[config]
                else:
                    raise _Local(loc, f"no row for configuration {dict(zip(sorted(pdisc), config))}")
                table[config] = self.components(row, pcont, rloc)
            return Potential.dirac(name, self.states_of(pdisc), table)
        if typ == "discrete":
            if var.kind is not VarKind.CHANCE_DISCRETE:
                raise _Local(loc, f"discrete potential on a {var.kind.value} variable")
            rows = self.rows(decl, pdisc, loc)
            table = {}
            full_disc = sorted(set(pdisc) | {name})
            for config in configurations(sorted(pdisc), self.states_of(pdisc)):
                if config not in rows:
                    raise _Local(loc, f"no row for configuration {dict(zip(sorted(pdisc), config))}")
                row, rloc = rows[config]
                probs = row.get("probs")
                if isinstance(probs, Sequence) and not isinstance(probs, str):
                    probs = dict(zip(var.states, probs))
                if not isinstance(probs, Mapping) or set(map(str, probs)) != set(var.states):
                    raise _Local(rloc, f"probs must cover the states {list(var.states)}")
                asg = dict(zip(sorted(pdisc), config))
                for s, f in probs.items():
                    asg[name] = str(s)
                    table[tuple(asg[n] for n in full_disc)] = build_function(
                        f, pcont, self.constants, f"{rloc}.probs.{s}")
            return Potential.from_mops(PotKind.DISCRETE, self.states_of(full_disc), set(pcont), table)
        if typ == "density":
            if var.kind is not VarKind.CHANCE_CONTINUOUS:
                raise _Local(loc, f"density potential on a {var.kind.value} variable")
            rows = self.rows(decl, pdisc, loc) if "table" in decl else None
            table = {}
            for config in configurations(sorted(pdisc), self.states_of(pdisc)):
                row, rloc = (decl, loc) if rows is None else rows.get(config, (None, loc))
                if row is None:
                    raise _Local(loc, f"no row for configuration {dict(zip(sorted(pdisc), config))}")
                table[config] = build_function(row.get("mop"), list(pcont) + [name],
                                               self.constants, rloc + ".mop")
            return Potential.from_mops(PotKind.CONTINUOUS, self.states_of(pdisc),
                                       set(pcont) | {name}, table)
        raise _Local(loc, f"unknown potential type {typ!r}")

    def distribution(self, decl, loc) -> DistributionSpec:
        m = decl.get("mop")
        if m is None or "truncation" not in m:
            raise _Local(loc, "infinite-support densities need mop: {pieces, degree, truncation}")
        try:
            return DistributionSpec(
                decl["type"], number(decl.get("mean", 0.0), self.constants, loc),
                number(decl.get("variance", 1.0), self.constants, loc),
                tuple(number(x, self.constants, loc) for x in m["truncation"]),
                int(m.get("pieces", 6)), int(m.get("degree", 3)))
        except ValueError as e:
            raise _Local(loc, str(e)) from None

    def components(self, row, pcont, loc) -> list[tuple[float, MOP]]:
        if "mixture" in row:
            comps = []
            for i, c in enumerate(row["mixture"]):
                cloc = f"{loc}.mixture[{i}]"
                comps.append((number(c.get("prob"), self.constants, cloc),
                              build_function(c.get("function"), pcont, self.constants,
                                             cloc + ".function")))
            total = sum(p for p, _ in comps)
            if abs(total - 1.0) > 1e-9:
                raise _Local(loc, f"mixture probabilities sum to {total}")
            return comps
        if "function" not in row:
            raise _Local(loc, "deterministic potential needs a function or mixture")
        return [(1.0, build_function(row["function"], pcont, self.constants, loc + ".function"))]

    def utility(self, name: str, decl: Mapping) -> Potential:
        loc = f"utilities.{name}"
        domain = list(decl.get("domain") or ())
        for v in domain:
            if v not in self.variables:
                raise _Local(loc, f"unknown variable {v!r} in domain")
        disc, cont = self.split(domain)
        table = {}
        if "table" in decl:
            rows = self.rows(decl, disc, loc)
            for config, (row, rloc) in rows.items():
                table[config] = build_function(row.get("value", 0), cont, self.constants,
                                               rloc + ".value")
        else:
            m = build_function(decl.get("value", 0), cont, self.constants, loc + ".value")
            for config in configurations(sorted(disc), self.states_of(disc)):
                table[config] = m
        if "support" in decl:
            bounds = {v: tuple(number(x, self.constants, loc) for x in iv)
                      for v, iv in decl["support"].items()}
            ind = MOP.indicator(bounds)
            table = {k: multiply(m, ind) for k, m in table.items()}
        return Potential.from_mops(PotKind.UTILITY, self.states_of(disc), set(cont), table)


def parse_diagram(text: str) -> InfluenceDiagram:
    """Parse and validate a diagram; raises :class:`ValidationError`."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        loc = f"line {mark.line + 1}" if mark else "document"
        raise ValidationError([(loc, f"syntax error: {getattr(e, 'problem', e)}")]) from None
    return from_dict(data)


def load_diagram(path) -> InfluenceDiagram:
    with open(path, encoding="utf-8") as f:
        return parse_diagram(f.read())


def from_dict(data: Any) -> InfluenceDiagram:
    probs = _Problems()
    if not isinstance(data, Mapping):
        raise ValidationError([("document", "expected a mapping at top level")])
    raw = copy.deepcopy(dict(data))
    _check_keys(data, {"format", "name", "constants", "variables", "potentials", "utilities",
                       "information", "notes"}, "document", probs)
    if data.get("format") != FORMAT_VERSION:
        probs.add("format", f"expected format: {FORMAT_VERSION}, got {data.get('format')!r}")
        probs.raise_if_any()
    constants = {}
    for k, v in (data.get("constants") or {}).items():
        try:
            constants[str(k)] = number(v, constants, f"constants.{k}")
        except _Local as e:
            probs.add(e.loc, str(e))
    variables: dict[str, Variable] = {}
    for name, d in (data.get("variables") or {}).items():
        v = _parse_variable(str(name), d, constants, probs)
        if v is not None:
            variables[str(name)] = v
    if not variables:
        probs.add("variables", "no variables declared")
    probs.raise_if_any()

    pots_decl = data.get("potentials") or {}
    parents: dict[str, tuple[str, ...]] = {}
    for name, decl in pots_decl.items():
        loc = f"potentials.{name}"
        if name not in variables:
            probs.add(loc, f"potential for unknown variable {name!r}")
            continue
        if variables[name].is_decision:
            probs.add(loc, f"decision {name} cannot have a potential")
            continue
        ps = tuple(str(p) for p in (decl.get("parents") or ()))
        for p in ps:
            if p not in variables:
                probs.add(loc, f"unknown parent {p!r}")
        parents[name] = ps
    for name, v in variables.items():
        if v.is_chance and name not in pots_decl:
            probs.add(f"variables.{name}", f"chance variable {name} has no potential")

    info = [tuple(str(x) for x in g) for g in (data.get("information") or ())]
    seen: dict[str, int] = {}
    for i, g in enumerate(info):
        for x in g:
            if x not in variables:
                probs.add(f"information[{i}]", f"unknown variable {x!r}")
            elif x in seen:
                probs.add(f"information[{i}]", f"{x} listed twice")
            seen[x] = i
        decs = [x for x in g if x in variables and variables[x].is_decision]
        if decs and len(g) != 1:
            probs.add(f"information[{i}]", f"decision {decs[0]} must form its own group")
    for name in variables:
        if name not in seen:
            probs.add("information", f"{name} is missing from the information sequence")
    for name, v in variables.items():
        if v.constraint:
            for p in v.constraint.parents:
                if p not in variables or not variables[p].is_discrete:
                    probs.add(f"variables.{name}.constraint", f"{p!r} is not a discrete variable")
                elif p in seen and name in seen and seen[p] >= seen[name]:
                    probs.add(f"variables.{name}.constraint",
                              f"{p} is not observed before decision {name}")
    probs.raise_if_any()

    # arcs: conditioning arcs plus informational arcs into decisions
    graph: dict[str, set[str]] = {n: set(parents.get(n, ())) for n in variables}
    for i, g in enumerate(info):
        for d in g:
            if variables[d].is_decision:
                for j in range(i):
                    graph[d].update(info[j])
    try:
        tuple(graphlib.TopologicalSorter(graph).static_order())
    except graphlib.CycleError as e:
        cycle = e.args[1]
        raise ValidationError([("arcs", "cycle " + " -> ".join(cycle))]) from None

    builder = _Builder(variables, constants)
    potentials: dict[str, Potential] = {}
    for name in pots_decl:
        try:
            potentials[name] = builder.chance(name, pots_decl[name], parents[name])
        except _Local as e:
            probs.add(e.loc, str(e))
            continue
        pot = potentials[name]
        extra = pot.domain - {name} - set(parents[name])
        if extra:
            probs.add(f"potentials.{name}", f"domain mismatch: uses {sorted(extra)} "
                                            f"outside its parents")
        if pots_decl[name].get("type") != "deterministic":
            for p in parents[name]:
                if variables[p].kind is VarKind.DECISION_CONTINUOUS:
                    probs.add(f"potentials.{name}",
                              f"continuous decision {p} in the domain of a density")
    utilities: dict[str, Potential] = {}
    for name, decl in (data.get("utilities") or {}).items():
        try:
            utilities[str(name)] = builder.utility(str(name), decl)
        except _Local as e:
            probs.add(e.loc, str(e))
            continue
        extra = utilities[str(name)].domain - set(decl.get("domain") or ())
        if extra:
            probs.add(f"utilities.{name}", f"domain mismatch: uses {sorted(extra)}")
    if not utilities:
        probs.add("utilities", "no utility potentials")
    for name, v in variables.items():
        if v.is_decision and not any(name in (u_decl.get("domain") or ())
                                     for u_decl in (data.get("utilities") or {}).values()):
            probs.add(f"variables.{name}",
                      f"decision {name} is not in the domain of any utility potential "
                      "(every decision must be)")
    probs.raise_if_any()
    return InfluenceDiagram(str(data.get("name", "")), variables, parents, potentials, utilities,
                            tuple(info), constants, raw)


def serialize(diagram: InfluenceDiagram) -> str:
    """Canonical text: sections in a fixed order, names sorted."""
    raw = diagram.raw
    out: dict[str, Any] = {"format": FORMAT_VERSION, "name": diagram.name}
    if raw.get("constants"):
        out["constants"] = dict(sorted(raw["constants"].items()))
    for section in ("variables", "potentials", "utilities"):
        out[section] = {k: raw.get(section, {})[k] for k in sorted(raw.get(section, {}))}
    out["information"] = [list(g) for g in diagram.information]
    return yaml.safe_dump(out, sort_keys=False, default_flow_style=None, width=100)


# ---------------------------------------------------------------------------
# elimination plans

@dataclass(frozen=True)
class EliminationPlan:
    order: tuple[str, ...]
    fused: tuple[tuple[str, ...], ...]

    def __iter__(self):
        return iter(self.order)


def _fusion_annotation(diagram: InfluenceDiagram, order: Sequence[str]):
    items = [({f"potential:{n}"}, set(p.domain)) for n, p in diagram.potentials.items()]
    items += [({f"utility:{n}"}, set(u.domain)) for n, u in diagram.utilities.items()]
    fused = []
    for x in order:
        hit = [it for it in items if x in it[1]]
        items = [it for it in items if x not in it[1]]
        names = set().union(*[h[0] for h in hit]) if hit else set()
        dom = set().union(*[h[1] for h in hit]) if hit else set()
        c = diagram.variables[x].constraint
        if c:
            dom |= set(c.parents)
        fused.append(tuple(sorted(names)))
        items.append(({f"message:{x}"}, dom - {x}))
    return tuple(fused)


def plan_elimination(diagram: InfluenceDiagram, order: Sequence[str] | None = None
                     ) -> EliminationPlan:
    """Check a requested order, or derive one, against the information sequence.

    If X precedes Y in the information sequence, Y is eliminated first.
    A deterministic variable is eliminated before the variables its
    function reads.
    """
    children = diagram.dirac_children()
    if order is None:
        order = []
        for group in reversed(diagram.information):
            pending = list(group)
            while pending:
                for x in reversed(pending):
                    if not children.get(x, set()) & set(pending):
                        break
                else:
                    raise PlanError(f"deterministic cycle among {pending}")
                order.append(x)
                pending.remove(x)
    order = tuple(order)
    names = set(diagram.variables)
    if set(order) != names or len(order) != len(names):
        missing = sorted(names - set(order))
        unknown = sorted(set(order) - names)
        dup = sorted({x for x in order if order.count(x) > 1})
        raise PlanError(f"order must list every variable once (missing {missing}, "
                        f"unknown {unknown}, repeated {dup})")
    pos = {x: i for i, x in enumerate(order)}
    for i, x in enumerate(order):
        gx = diagram.group_of(x)
        for y in order[i + 1:]:
            if diagram.group_of(y) > gx:
                raise PlanError(f"{x} is eliminated before {y}, but {x} precedes {y} "
                                "in the information sequence")
    for par, kids in children.items():
        for k in kids:
            if pos[k] > pos[par]:
                raise PlanError(f"{par} is eliminated before its deterministic child {k}")
    return EliminationPlan(order, _fusion_annotation(diagram, order))
