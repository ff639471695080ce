"""Independent checks on solver output: Monte Carlo strategy evaluation on the
true (closed-form) model, quadrature, and exhaustive grid search."""
from __future__ import annotations

import graphlib
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
import sympy as sp
from scipy import integrate

from hybridid.distributions import NORMAL, DistributionSpec
from hybridid.errors import UnsamplableError
from hybridid.model import InfluenceDiagram, _Builder, _sympify, build_function, number
from hybridid.mop import MOP
from hybridid.policy import CONSTANT, DecisionFunction, Rule, Strategy
from hybridid.variables import VarKind, configurations

EXACT = "exact"
MOP_CURVES = "mop"


@dataclass(frozen=True)
class OracleEstimate:
    mean: float
    stderr: float
    n: int
    seed: int
    workers: int = 1

    def to_json(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n": self.n, "seed": self.seed,
                "workers": self.workers}


class _Curves:
    """Vectorized evaluators for the function declarations of a diagram."""

    def __init__(self, diagram: InfluenceDiagram, mode: str):
        self.d = diagram
        self.mode = mode
        self.builder = _Builder(diagram.variables, diagram.constants)

    def function(self, spec, cont: Sequence[str], loc: str) -> Callable[[Mapping], np.ndarray]:
        if self.mode == MOP_CURVES or (isinstance(spec, Mapping) and "pieces" in spec
                                       and "expr" not in spec):
            m = build_function(spec, cont, self.d.constants, loc)
            return lambda env: _eval_mop(m, env)
        if isinstance(spec, (int, float)):
            return lambda env, c=float(spec): np.full(_n(env), c)
        text = spec if isinstance(spec, str) else spec.get("exact", spec["expr"])
        expr = _sympify(str(text), cont, self.d.constants, loc)
        syms = sorted(expr.free_symbols, key=str)
        f = sp.lambdify(syms, expr, "numpy")
        names = [str(s) for s in syms]
        return lambda env: np.broadcast_to(np.asarray(f(*[env[v] for v in names]), float),
                                           (_n(env),)).copy()


_N_KEY = "__n__"


def _n(env) -> int:
    return env[_N_KEY]


def _eval_mop(m: MOP, env) -> np.ndarray:
    if not m.scope:
        return np.full(_n(env), m.scalar() if m.pieces else 0.0)
    return np.asarray(m.evaluate({v: env[v] for v in m.scope}), float)


def _row_masks(builder: _Builder, decl: Mapping, disc: Sequence[str], env, loc: str):
    """Yield ``(mask, row)`` for each table row (or the whole declaration)."""
    n = _n(env)
    if "table" not in decl:
        yield np.ones(n, dtype=bool), decl
        return
    rows = builder.rows(decl, disc, loc)
    names = sorted(disc)
    for config, (row, _) in rows.items():
        mask = np.ones(n, dtype=bool)
        for name, s in zip(names, config):
            mask &= env[name] == s
        yield mask, row


def sampling_order(diagram: InfluenceDiagram) -> list[str]:
    graph = {n: set(diagram.parents.get(n, ())) for n in diagram.variables}
    for i, g in enumerate(diagram.information):
        for x in g:
            if diagram.variables[x].is_decision:
                for j in range(i):
                    graph[x].update(diagram.information[j])
    return list(graphlib.TopologicalSorter(dict(sorted(graph.items()))).static_order())


def simulate(diagram: InfluenceDiagram, strategy: Strategy, n: int, seed: int,
             curves: str = EXACT) -> np.ndarray:
    """Total utility of ``n`` forward samples following ``strategy``."""
    rng = np.random.default_rng(seed)
    ev = _Curves(diagram, curves)
    env: dict = {_N_KEY: n}
    raw_pots = diagram.raw.get("potentials", {})
    for x in sampling_order(diagram):
        var = diagram.variables[x]
        if var.is_decision:
            fn = strategy.functions[x]
            env[x] = fn.act_vectorized(env, n)
            continue
        decl = raw_pots[x]
        parents = diagram.parents.get(x, ())
        disc = [p for p in parents if diagram.variables[p].is_discrete]
        cont = [p for p in parents if not diagram.variables[p].is_discrete]
        typ = decl.get("type")
        loc = f"potentials.{x}"
        if typ == NORMAL:
            spec = DistributionSpec(NORMAL, number(decl.get("mean", 0), diagram.constants),
                                    number(decl.get("variance", 1), diagram.constants))
            env[x] = spec.sample(rng, n)
        elif typ == "deterministic":
            out = np.zeros(n)
            for mask, row in _row_masks(ev.builder, decl, disc, env, loc):
                if "mixture" in row:
                    u = rng.random(n)
                    acc = 0.0
                    for c in row["mixture"]:
                        p = number(c["prob"], diagram.constants)
                        pick = mask & (u >= acc) & (u < acc + p)
                        out[pick] = ev.function(c["function"], cont, loc)(env)[pick]
                        acc += p
                else:
                    out[mask] = ev.function(row["function"], cont, loc)(env)[mask]
            env[x] = out
        elif typ == "discrete":
            out = np.empty(n, dtype=object)
            u = rng.random(n)
            for mask, row in _row_masks(ev.builder, decl, disc, env, loc):
                probs = row["probs"]
                if not isinstance(probs, Mapping):
                    probs = dict(zip(var.states, probs))
                acc = np.zeros(n)
                for s in var.states:
                    p = ev.function(probs[s], cont, loc)(env)
                    pick = mask & (u >= acc) & (u < acc + p)
                    out[pick] = s
                    acc = acc + p
            env[x] = out
        else:
            raise UnsamplableError(f"{x}: cannot sample a {typ!r} declaration; "
                                   "declare a closed-form distribution")
    total = np.zeros(n)
    for name, decl in diagram.raw.get("utilities", {}).items():
        domain = list(decl.get("domain") or ())
        disc = [v for v in domain if diagram.variables[v].is_discrete]
        cont = [v for v in domain if not diagram.variables[v].is_discrete]
        loc = f"utilities.{name}"
        vals = np.zeros(n)
        for mask, row in _row_masks(ev.builder, decl, disc, env, loc):
            vals[mask] = ev.function(row.get("value", 0), cont, loc)(env)[mask]
        if "support" in decl:
            for v, iv in decl["support"].items():
                a, b = (number(t, diagram.constants) for t in iv)
                vals[(env[v] < a) | (env[v] >= b)] = 0.0
        total += vals
    return total


def mc_evaluate(diagram: InfluenceDiagram, strategy: Strategy, n: int = 100_000, seed: int = 0,
                curves: str = EXACT) -> OracleEstimate:
    """Expected utility of ``strategy`` by forward sampling the true model.

    ``curves="mop"`` swaps the closed-form deterministic functions and
    utilities for their MOP approximations (densities stay exact), which
    isolates the effect of curve approximation.
    """
    u = simulate(diagram, strategy, n, seed, curves)
    se = float(np.std(u, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return OracleEstimate(float(np.mean(u)), se, n, seed)


def quad_integral(m: MOP, var: str, point: Mapping[str, float] | None = None,
                  limits: tuple[float, float] | None = None) -> float:
    """Adaptive quadrature of a MOP over ``var`` (other variables fixed)."""
    point = dict(point or {})
    if limits is None:
        b = m.breakpoints(var)
        limits = (b[0], b[-1]) if b else (0.0, 0.0)
    brk = [x for x in m.breakpoints(var) if limits[0] < x < limits[1]]

    def f(x):
        point[var] = x
        return m({v: point[v] for v in m.scope})

    val, _ = integrate.quad(f, limits[0], limits[1], points=brk or None, limit=500,
                            epsabs=1e-12, epsrel=1e-12)
    return float(val)


# ---------------------------------------------------------------------------
# strategy construction and search

def constant_decision(name: str, value: float) -> DecisionFunction:
    return DecisionFunction(name, CONSTANT, (), {(): Rule(argmax=float(value))})


def shift_switches(fn: DecisionFunction, shifts: Mapping[tuple, Sequence[float]]) -> DecisionFunction:
    """Move the internal breakpoints of a threshold policy, per configuration."""
    rules = {}
    for config, rule in fn.rules.items():
        d = list(shifts.get(config, ()))
        if not rule.intervals or not d:
            rules[config] = rule
            continue
        edges = [rule.intervals[0][0]] + [hi for _, hi, _ in rule.intervals]
        inner = [e + d[i % len(d)] for i, e in enumerate(edges[1:-1])]
        inner = list(np.maximum.accumulate(inner)) if inner else []
        new_edges = [edges[0]] + inner + [edges[-1]]
        ivs = tuple((a, b, alt) for (a, b), (_, _, alt) in
                    zip(zip(new_edges[:-1], new_edges[1:]), rule.intervals) if a < b)
        rules[config] = Rule(intervals=ivs)
    return DecisionFunction(fn.decision, fn.form, fn.parents, rules, fn.variable)


def set_switch(fn: DecisionFunction, config: tuple, old: float, new: float) -> DecisionFunction:
    """Replace one switch point ``old`` of a threshold policy by ``new``."""
    rule = fn.rules[config]
    ivs = []
    for a, b, alt in rule.intervals:
        a = new if a == old else a
        b = new if b == old else b
        if a < b:
            ivs.append((a, b, alt))
    rules = dict(fn.rules)
    rules[config] = Rule(intervals=tuple(ivs))
    return DecisionFunction(fn.decision, fn.form, fn.parents, rules, fn.variable)


def perturb(diagram: InfluenceDiagram, strategy: Strategy, rng: np.random.Generator,
            scale: float = 0.1) -> Strategy:
    """A random nearby strategy: continuous decisions move by up to ``scale``
    of their interval, threshold policies' switch points by up to ``scale``
    (in the policy variable's units), and table choices are resampled."""
    functions = {}
    for name, fn in strategy.functions.items():
        var = diagram.variables[name]
        if fn.form == CONSTANT:
            lo, hi = var.interval
            rules = {c: Rule(argmax=float(np.clip(r.argmax + rng.uniform(-1, 1) * scale * (hi - lo),
                                                  lo, hi)))
                     for c, r in fn.rules.items()}
            functions[name] = DecisionFunction(name, fn.form, fn.parents, rules, fn.variable)
        elif fn.variable:
            shifts = {c: rng.uniform(-scale, scale, size=max(1, len(r.intervals) - 1))
                      for c, r in fn.rules.items()}
            functions[name] = shift_switches(fn, shifts)
        else:
            rules = {}
            for c, r in fn.rules.items():
                asg = dict(zip(fn.parents, c))
                allowed = (var.constraint.allowed(asg, var.states) if var.constraint
                           else var.states)
                rules[c] = Rule(choice=str(rng.choice(list(allowed))))
            functions[name] = DecisionFunction(name, fn.form, fn.parents, rules, fn.variable)
    return Strategy(functions, strategy.root_value)


def grid_search(diagram: InfluenceDiagram, grids: Mapping[str, Sequence[DecisionFunction]],
                base: Strategy | None = None, method: str = "exact", n: int = 100_000,
                seed: int = 0, curves: str = EXACT
                ) -> tuple[float, dict[str, DecisionFunction], list[float]]:
    """Evaluate every combination of candidate decision functions.

    ``method`` is ``"exact"`` (solver-side strategy evaluation) or ``"mc"``
    (:func:`mc_evaluate` with common random numbers, ``curves`` as there).
    Decisions without a
    grid keep their function from ``base``. Ties keep the first candidate.
    """
    from hybridid.solver import evaluate_strategy

    names = sorted(grids)
    best_val, best = -math.inf, {}
    values = []
    for combo in itertools.product(*[grids[k] for k in names]):
        functions = dict(base.functions) if base else {}
        functions.update(zip(names, combo))
        s = Strategy(functions, math.nan)
        if method == "exact":
            v = evaluate_strategy(diagram, s)
        elif method == "mc":
            v = mc_evaluate(diagram, s, n, seed, curves).mean
        else:
            raise ValueError(f"unknown method {method!r}")
        values.append(v)
        if v > best_val:
            best_val, best = v, dict(zip(names, combo))
    return best_val, best, values


def discrete_grid(diagram: InfluenceDiagram, name: str) -> list[DecisionFunction]:
    """Every table policy of a discrete decision without continuous observations."""
    var = diagram.variables[name]
    if var.kind is not VarKind.DECISION_DISCRETE:
        raise ValueError(f"{name} is not a discrete decision")
    parents = tuple(var.constraint.parents) if var.constraint else ()
    configs = list(configurations(parents, diagram.states()))
    options = []
    for c in configs:
        asg = dict(zip(parents, c))
        options.append(var.constraint.allowed(asg, var.states) if var.constraint else var.states)
    out = []
    for choice in itertools.product(*options):
        rules = {c: Rule(choice=s) for c, s in zip(configs, choice)}
        out.append(DecisionFunction(name, "table", parents, rules))
    return out
