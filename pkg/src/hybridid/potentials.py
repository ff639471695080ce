"""Discrete, continuous (density and Dirac) and utility potentials, and mixed triples.

A potential is a table from configurations of its discrete variables to a
sum of terms. A term is a MOP weight times a product of Dirac deltas
``delta(target - g)``; a Dirac mixture ``sum_i p_i delta(z - g_i)`` is one
term per mixture component. Deltas stay symbolic until their target is
integrated out, at which point they are sifted (``g`` substituted into the
rest of the term).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from hybridid.errors import (DivisionNotClosed, ParametricMaximizationError, PotentialError,
                             UnboundedIntegralError, UnsupportedScopeError)
from hybridid.mop import (MOP, add, divide_entries, equals_constant, integrate_out,
                          maximize_1d, multiply, pointwise_max_many, substitute)
from hybridid.policy import CONSTANT, TABLE, THRESHOLD, DecisionFunction, Rule
from hybridid.variables import DecisionConstraint, configurations

VACUITY_TOL = 1e-9


class PotKind(enum.Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"
    UTILITY = "utility"


@dataclass(frozen=True)
class Term:
    weight: MOP
    deltas: tuple[tuple[str, MOP], ...] = ()

    def targets(self) -> tuple[str, ...]:
        return tuple(t for t, _ in self.deltas)

    def structurally_equal(self, other: "Term") -> bool:
        return (self.weight.structurally_equal(other.weight)
                and self.targets() == other.targets()
                and all(a.structurally_equal(b) for (_, a), (_, b) in zip(self.deltas, other.deltas)))


def _simplify(terms: Iterable[Term]) -> tuple[Term, ...]:
    free: MOP | None = None
    rest = []
    for t in terms:
        if not t.weight.pieces:
            continue
        if t.deltas:
            rest.append(t)
        else:
            free = t.weight if free is None else add(free, t.weight)
    head = (Term(free),) if free is not None and free.pieces else ()
    return head + tuple(rest)


def _mul_terms(a: Term, b: Term) -> Term:
    deltas = dict(a.deltas)
    for tgt, g in b.deltas:
        if tgt in deltas:
            raise PotentialError(f"two Dirac deltas for {tgt} in one product")
        deltas[tgt] = g
    return Term(multiply(a.weight, b.weight), tuple(sorted(deltas.items())))


class Potential:
    """Table of MOP-valued term sums indexed by discrete configurations."""

    __slots__ = ("kind", "discrete", "states", "cvars", "table")

    def __init__(self, kind: PotKind, states: Mapping[str, Sequence[str]],
                 cvars: Iterable[str], table: Mapping[tuple, Iterable[Term]]):
        self.kind = kind
        self.discrete = tuple(sorted(states))
        self.states = {n: tuple(states[n]) for n in self.discrete}
        self.cvars = frozenset(cvars)
        self.table = {c: _simplify(table.get(c, ()))
                      for c in configurations(self.discrete, self.states)}

    # -- constructors -----------------------------------------------------
    @classmethod
    def identity(cls, kind: PotKind) -> "Potential":
        if kind is PotKind.UTILITY:
            return cls(kind, {}, (), {})
        return cls(kind, {}, (), {(): [Term(MOP.constant(1.0))]})

    @classmethod
    def from_mops(cls, kind: PotKind, states: Mapping[str, Sequence[str]], cvars: Iterable[str],
                  table: Mapping[tuple, MOP]) -> "Potential":
        """Delta-free potential; ``table`` keys follow sorted discrete names."""
        return cls(kind, states, cvars, {k: [Term(m)] for k, m in table.items()})

    @classmethod
    def dirac(cls, target: str, states: Mapping[str, Sequence[str]],
              table: Mapping[tuple, Sequence[tuple[float, MOP]]]) -> "Potential":
        """Conditional of a deterministic variable: per configuration a list of
        ``(probability, g)`` mixture components."""
        cvars = {target}
        out = {}
        for k, comps in table.items():
            out[k] = [Term(MOP.constant(float(p)), ((target, g),)) for p, g in comps]
            for _, g in comps:
                cvars.update(g.scope)
        return cls(PotKind.CONTINUOUS, states, cvars, out)

    # -- inspection -------------------------------------------------------
    @property
    def domain(self) -> frozenset[str]:
        return frozenset(self.discrete) | self.cvars

    def key(self, assignment: Mapping[str, str]) -> tuple[str, ...]:
        return tuple(assignment[n] for n in self.discrete)

    def entry(self, assignment: Mapping[str, str]) -> tuple[Term, ...]:
        return self.table[self.key(assignment)]

    def weight(self, assignment: Mapping[str, str]) -> MOP:
        """The entry as a single MOP; fails while Dirac deltas remain."""
        terms = self.entry(assignment)
        if any(t.deltas for t in terms):
            raise PotentialError("entry still carries Dirac deltas")
        return terms[0].weight if terms else MOP.zero()

    def value(self, assignment: Mapping) -> float:
        m = self.weight(assignment)
        return m({v: assignment[v] for v in m.scope}) if m.pieces else 0.0

    def has_deltas(self) -> bool:
        return any(t.deltas for terms in self.table.values() for t in terms)

    def is_identity(self) -> bool:
        if self.discrete or self.cvars:
            return False
        terms = self.table[()]
        if self.kind is PotKind.UTILITY:
            return not terms
        return (len(terms) == 1 and not terms[0].deltas and not terms[0].weight.scope
                and terms[0].weight.scalar() == 1.0)

    def is_vacuous(self, tol: float = VACUITY_TOL) -> bool:
        """All values are one (up to ``tol``)."""
        for terms in self.table.values():
            if len(terms) != 1 or terms[0].deltas:
                return False
            if not equals_constant(terms[0].weight, 1.0, tol):
                return False
        return True

    def cast(self, kind: PotKind) -> "Potential":
        if kind is self.kind:
            return self
        p = object.__new__(Potential)
        p.kind, p.discrete, p.states, p.cvars, p.table = \
            kind, self.discrete, self.states, self.cvars, self.table
        return p

    def scope_mops(self) -> Iterable[MOP]:
        for terms in self.table.values():
            for t in terms:
                yield t.weight
                for _, g in t.deltas:
                    yield g

    def structurally_equal(self, other: "Potential") -> bool:
        if (self.kind, self.discrete, self.states, self.cvars) != \
                (other.kind, other.discrete, other.states, other.cvars):
            return False
        for k, terms in self.table.items():
            o = other.table[k]
            if len(terms) != len(o) or not all(a.structurally_equal(b) for a, b in zip(terms, o)):
                return False
        return True

    def __repr__(self):
        return (f"Potential({self.kind.value}, discrete={self.discrete}, "
                f"continuous={sorted(self.cvars)})")


def _merge_states(*ps: Potential, extra: Mapping[str, Sequence[str]] | None = None) -> dict:
    out: dict[str, tuple] = {}
    for src in [p.states for p in ps] + ([extra] if extra else []):
        for n, s in src.items():
            s = tuple(s)
            if n in out and out[n] != s:
                raise PotentialError(f"inconsistent states for {n}: {out[n]} vs {s}")
            out[n] = s
    return out


def combine_utility(a: Potential, b: Potential) -> Potential:
    """Pointwise sum of two utility potentials."""
    if a.kind is not PotKind.UTILITY or b.kind is not PotKind.UTILITY:
        raise PotentialError("combine_utility expects utility potentials")
    if a.is_identity():
        return b
    if b.is_identity():
        return a
    states = _merge_states(a, b)
    names = sorted(states)
    table = {}
    for config in configurations(names, states):
        asg = dict(zip(names, config))
        table[config] = a.entry(asg) + b.entry(asg)
    return Potential(PotKind.UTILITY, states, a.cvars | b.cvars, table)


def combine_mul(a: Potential, b: Potential) -> Potential:
    """Pointwise product. Discrete times continuous is tagged continuous;
    mixed marginalization recasts it to the slot it ends up in."""
    if a.kind is PotKind.UTILITY and b.kind is PotKind.UTILITY:
        raise PotentialError("two utility potentials combine by addition, use combine_utility")
    if PotKind.UTILITY in (a.kind, b.kind):
        kind = PotKind.UTILITY
    elif a.kind is b.kind:
        kind = a.kind
    else:
        kind = PotKind.CONTINUOUS
    if a.is_identity() and a.kind is not PotKind.UTILITY:
        return b.cast(kind)
    if b.is_identity() and b.kind is not PotKind.UTILITY:
        return a.cast(kind)
    states = _merge_states(a, b)
    names = sorted(states)
    table = {}
    for config in configurations(names, states):
        asg = dict(zip(names, config))
        table[config] = [_mul_terms(x, y) for x in a.entry(asg) for y in b.entry(asg)]
    return Potential(kind, states, a.cvars | b.cvars, table)


def combine(a: Potential, b: Potential) -> Potential:
    if a.kind is PotKind.UTILITY and b.kind is PotKind.UTILITY:
        return combine_utility(a, b)
    return combine_mul(a, b)


def sum_out(p: Potential, x: str) -> Potential:
    """Marginalize a discrete variable by summation over its states."""
    if x not in p.discrete:
        raise PotentialError(f"{x} is not a discrete variable of {p}")
    states = {n: s for n, s in p.states.items() if n != x}
    names = sorted(states)
    table = {}
    for config in configurations(names, states):
        asg = dict(zip(names, config))
        terms: list[Term] = []
        for s in p.states[x]:
            asg[x] = s
            terms.extend(p.entry(asg))
        table[config] = terms
    return Potential(p.kind, states, p.cvars, table)


def _integrate_term(t: Term, x: str) -> tuple[Term, set[str]]:
    sift = [g for tgt, g in t.deltas if tgt == x]
    rest = [(tgt, g) for tgt, g in t.deltas if tgt != x]
    if any(x in g.scope for _, g in rest):
        raise PotentialError(
            f"{x} is an argument of a Dirac delta whose target is still present")
    if sift:
        g = sift[0]
        w = substitute(t.weight, x, g) if x in t.weight.scope else t.weight
        return Term(w, tuple(rest)), set(g.scope)
    if x in t.weight.scope:
        return Term(integrate_out(t.weight, x), tuple(rest)), set()
    if not t.weight.pieces:
        return t, set()
    raise UnboundedIntegralError(f"integrand constant in {x} over the real line")


def integrate(p: Potential, x: str) -> Potential:
    """Marginalize a continuous variable: integration, or sifting when a
    Dirac delta targets it."""
    if x not in p.cvars:
        raise PotentialError(f"{x} is not a continuous variable of {p}")
    cvars = set(p.cvars - {x})
    table = {}
    for k, terms in p.table.items():
        out = []
        for t in terms:
            nt, extra = _integrate_term(t, x)
            cvars |= extra
            out.append(nt)
        table[k] = out
    return Potential(p.kind, p.states, cvars, table)


def marginalize_chance(p: Potential, x: str) -> Potential:
    return sum_out(p, x) if x in p.discrete else integrate(p, x)


def divide(a: Potential, m: Potential, kind: PotKind | None = None) -> Potential:
    """``a / m`` with ``0/0 = 0``; ``m`` is a marginal of ``a``."""
    if m.has_deltas():
        raise DivisionNotClosed("divisor carries Dirac deltas")
    table = {}
    for config, terms in a.table.items():
        asg = dict(zip(a.discrete, config))
        den = m.weight(asg)
        out = []
        for t in terms:
            if not den.scope and den.pieces and den.scalar() == 1.0:
                out.append(t)
            else:
                out.append(Term(divide_entries(t.weight, den), t.deltas))
        table[config] = out
    return Potential(kind or a.kind, a.states, a.cvars, table)


def _utility_mop(p: Potential, asg) -> MOP:
    try:
        return p.weight(asg)
    except PotentialError as e:
        raise PotentialError(f"cannot maximize over a utility with Dirac deltas: {e}") from None


def maximize(p: Potential, x: str, *, states: Sequence[str] | None = None,
             constraint: DecisionConstraint | None = None,
             parent_states: Mapping[str, Sequence[str]] | None = None,
             interval: tuple[float, float] | None = None,
             capture: dict | None = None) -> tuple[Potential, DecisionFunction]:
    """Maximize a utility potential over decision ``x``.

    Discrete decisions pass ``states`` (in declared order, which breaks
    ties) and optionally a ``constraint`` on the allowed alternatives, whose
    parent states come from ``parent_states``. Continuous decisions pass
    ``interval``. ``capture`` receives, per configuration, the utility of
    each alternative before maximization.
    """
    if p.kind is not PotKind.UTILITY:
        raise PotentialError("maximization applies to utility potentials")
    if states is not None:
        return _maximize_discrete(p, x, tuple(states), constraint, parent_states or {}, capture)
    return _maximize_continuous(p, x, interval, capture)


def _maximize_discrete(p, x, states, constraint, parent_states, capture):
    extra = {x: states}
    if constraint:
        for par in constraint.parents:
            extra[par] = tuple(parent_states[par])
    all_states = _merge_states(p, extra=extra)
    rest = {n: s for n, s in all_states.items() if n != x}
    names = sorted(rest)
    per_config = {}
    scope: set[str] = set()
    for config in configurations(names, rest):
        asg = dict(zip(names, config))
        allowed = constraint.allowed(asg, states) if constraint else states
        if not allowed:
            raise PotentialError(f"no allowed alternative for {x} at {asg}")
        mops = []
        for s in allowed:
            asg[x] = s
            mops.append(_utility_mop(p, {n: asg[n] for n in p.discrete}))
        per_config[config] = (allowed, mops)
        for m in mops:
            scope |= set(m.scope)
    if len(scope) > 1:
        raise UnsupportedScopeError(
            f"maximizing {x} over a utility of {len(scope)} continuous variables {sorted(scope)}")
    var = next(iter(scope)) if scope else None
    table, rules = {}, {}
    for config, (allowed, mops) in per_config.items():
        env, policy = pointwise_max_many([m.extend(scope) for m in mops], allowed)
        table[config] = env
        if capture is not None:
            capture[config] = dict(zip(allowed, mops))
        if var is None:
            rules[config] = Rule(choice=policy[0][2])
        else:
            rules[config] = Rule(intervals=tuple(policy))
    cvars = p.cvars - {x}
    out = Potential.from_mops(PotKind.UTILITY, rest, cvars, table)
    form = THRESHOLD if var else TABLE
    return out, DecisionFunction(x, form, tuple(names), rules, var)


def _maximize_continuous(p, x, interval, capture):
    if interval is None:
        raise PotentialError(f"continuous decision {x} needs an interval")
    table, rules = {}, {}
    for config in p.table:
        asg = dict(zip(p.discrete, config))
        m = _utility_mop(p, asg)
        if capture is not None:
            capture[config] = {x: m}
        others = sorted(set(m.scope) - {x})
        if others:
            raise ParametricMaximizationError(
                f"maximizing {x} while the utility still depends on {others}")
        if x not in m.scope:
            val = m.scalar() if m.pieces else 0.0
            arg = float(interval[0])
        else:
            val, arg = maximize_1d(m, interval)
        table[config] = MOP.constant(val) if val != 0.0 else MOP.zero()
        rules[config] = Rule(argmax=float(arg), value=float(val))
    out = Potential.from_mops(PotKind.UTILITY, p.states, p.cvars - {x}, table)
    return out, DecisionFunction(x, CONSTANT, p.discrete, rules, None)


# ---------------------------------------------------------------------------
# mixed potentials

@dataclass(frozen=True)
class Mixed:
    """(discrete part, continuous part, utility part)."""

    disc: Potential
    cont: Potential
    util: Potential

    @classmethod
    def identity(cls) -> "Mixed":
        return cls(Potential.identity(PotKind.DISCRETE), Potential.identity(PotKind.CONTINUOUS),
                   Potential.identity(PotKind.UTILITY))

    @classmethod
    def wrap(cls, p: Potential) -> "Mixed":
        ident = cls.identity()
        if p.kind is PotKind.DISCRETE:
            return cls(p, ident.cont, ident.util)
        if p.kind is PotKind.CONTINUOUS:
            return cls(ident.disc, p, ident.util)
        return cls(ident.disc, ident.cont, p)

    @property
    def domain(self) -> frozenset[str]:
        return self.disc.domain | self.cont.domain | self.util.domain

    def is_identity(self) -> bool:
        return self.disc.is_identity() and self.cont.is_identity() and self.util.is_identity()


def combine_mixed(a: Mixed, b: Mixed) -> Mixed:
    return Mixed(combine_mul(a.disc, b.disc), combine_mul(a.cont, b.cont),
                 combine_utility(a.util, b.util))


_ID_D = Potential.identity(PotKind.DISCRETE)
_ID_C = Potential.identity(PotKind.CONTINUOUS)


def marginalize_mixed_decision(mu: Mixed, x: str, **decision) -> tuple[Mixed, DecisionFunction]:
    """Fold the parts containing ``x`` into the utility, then maximize.

    ``decision`` is forwarded to :func:`maximize`.
    """
    if x not in mu.util.domain:
        raise PotentialError(f"decision {x} is not in the domain of any utility potential")
    u = mu.util
    disc, cont = mu.disc, mu.cont
    if x in disc.domain:
        u = combine_mul(disc, u)
        disc = _ID_D
    if x in cont.domain:
        u = combine_mul(cont, u)
        cont = _ID_C
    u, fn = maximize(u, x, **decision)
    return Mixed(disc, cont, u), fn


def marginalize_mixed_chance(mu: Mixed, x: str, *, chance_discrete: Iterable[str],
                             chance_continuous: Iterable[str], allow_shortcut: bool = True,
                             single_utility: bool = False) -> Mixed:
    """Remove chance variable ``x`` following the twelve-case table.

    With ``allow_shortcut``, divisions are skipped when there is a single
    utility potential or the divisor is vacuous.
    """
    cd, cc = frozenset(chance_discrete), frozenset(chance_continuous)
    a, z, v = mu.disc, mu.cont, mu.util
    r, s, t = a.domain, z.domain, v.domain
    in_r, in_s, in_t = x in r, x in s, x in t
    marg = lambda p: marginalize_chance(p, x)  # noqa: E731

    def slot_disc(p):
        return p.cast(PotKind.DISCRETE)

    def slot_cont(p):
        return p.cast(PotKind.CONTINUOUS)

    if not in_t:
        if in_r and in_s:
            m = marg(combine_mul(a, z))
            if (r | s) - {x} <= cd:
                return Mixed(slot_disc(m), _ID_C, v)
            return Mixed(_ID_D, slot_cont(m), v)
        if in_s:
            m = marg(z)
            if s - {x} <= cd:
                return Mixed(slot_disc(combine_mul(a, m)), _ID_C, v)
            return Mixed(a, slot_cont(m), v)
        if in_r:
            m = marg(a)
            if r - {x} <= cc:
                return Mixed(_ID_D, slot_cont(combine_mul(m, z)), v)
            return Mixed(slot_disc(m), z, v)
        raise PotentialError(f"{x} is not in the mixed potential's domain")

    if not in_r and not in_s:
        return Mixed(a, z, marg(v))
    if in_r and in_s:
        prob = combine_mul(a, z)
    elif in_s:
        prob = z
    else:
        prob = a
    divisor = marg(prob)
    if allow_shortcut and (single_utility or divisor.is_vacuous()):
        u = marg(combine_mul(prob, v))
        if in_r and in_s:
            return Mixed(_ID_D, _ID_C, u)
        if in_s:
            return Mixed(a, _ID_C, u)
        return Mixed(_ID_D, z, u)
    try:
        q = divide(prob, divisor)
    except DivisionNotClosed as e:
        raise DivisionNotClosed(
            f"dividing by the marginal of {x} ({'discrete' if in_r else ''}"
            f"{'+' if in_r and in_s else ''}{'continuous' if in_s else ''} part): {e}; "
            "a single utility potential or a vacuous divisor permits the division-free form"
        ) from None
    u = marg(combine_mul(q, v))
    if in_r and in_s:
        if (r | s) - {x} <= cd:
            return Mixed(slot_disc(divisor), _ID_C, u)
        return Mixed(_ID_D, slot_cont(divisor), u)
    if in_s:
        if s - {x} <= cd:
            return Mixed(slot_disc(combine_mul(a, divisor)), _ID_C, u)
        return Mixed(a, slot_cont(divisor), u)
    if r - {x} <= cc:
        return Mixed(_ID_D, slot_cont(combine_mul(divisor, z)), u)
    return Mixed(slot_disc(divisor), z, u)
