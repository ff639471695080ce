"""Decision functions captured while maximizing out decision variables."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

CONSTANT = "constant"
THRESHOLD = "threshold"
TABLE = "table"


def _num(x: float) -> float | str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _unnum(x) -> float:
    return float(x)


@dataclass(frozen=True)
class Rule:
    """What to do in one configuration of the discrete conditioning variables.

    ``choice`` is the optimal alternative when nothing continuous is
    observed; ``intervals`` maps ranges of ``variable`` to alternatives;
    ``argmax``/``value`` describe a maximized continuous decision.
    """

    choice: str | None = None
    intervals: tuple[tuple[float, float, str], ...] = ()
    argmax: float | None = None
    value: float | None = None

    def act(self, x: float | None = None):
        if self.argmax is not None:
            return self.argmax
        if self.intervals:
            for lo, hi, alt in self.intervals:
                if lo <= x < hi:
                    return alt
            raise ValueError(f"{x} outside the policy intervals")
        return self.choice

    def switch_points(self) -> list[tuple[float, str, str]]:
        """Breakpoints where the optimal alternative changes."""
        out = []
        for (_, hi, a), (lo, _, b) in zip(self.intervals[:-1], self.intervals[1:]):
            if a != b:
                out.append((hi, a, b))
        return out


@dataclass(frozen=True)
class DecisionFunction:
    decision: str
    form: str
    parents: tuple[str, ...]
    rules: Mapping[tuple[str, ...], Rule]
    variable: str | None = None

    def rule(self, assignment: Mapping[str, Any]) -> Rule:
        return self.rules[tuple(assignment[p] for p in self.parents)]

    def act(self, assignment: Mapping[str, Any]):
        r = self.rule(assignment)
        return r.act(assignment.get(self.variable) if self.variable else None)

    def act_vectorized(self, assignment: Mapping[str, np.ndarray], n: int) -> np.ndarray:
        """Alternatives (object array) or decision values for ``n`` samples."""
        keys = [np.asarray(assignment[p]) for p in self.parents]
        x = np.asarray(assignment[self.variable], dtype=float) if self.variable else None
        if self.form == CONSTANT:
            out = np.empty(n)
        else:
            out = np.empty(n, dtype=object)
        for config, rule in self.rules.items():
            mask = np.ones(n, dtype=bool)
            for k, s in zip(keys, config):
                mask &= k == s
            if not mask.any():
                continue
            if rule.argmax is not None:
                out[mask] = rule.argmax
            elif rule.intervals:
                xs = x[mask]
                vals = np.empty(xs.shape[0], dtype=object)
                for lo, hi, alt in rule.intervals:
                    vals[(xs >= lo) & (xs < hi)] = alt
                out[mask] = vals
            else:
                out[mask] = rule.choice
        return out

    def to_json(self) -> dict:
        rules = []
        for config in sorted(self.rules):
            r = self.rules[config]
            entry: dict[str, Any] = {"when": dict(zip(self.parents, config))}
            if r.argmax is not None:
                entry["argmax"] = r.argmax
                entry["value"] = r.value
            elif r.intervals:
                entry["intervals"] = [[_num(lo), _num(hi), alt] for lo, hi, alt in r.intervals]
            else:
                entry["choice"] = r.choice
            rules.append(entry)
        out = {"form": self.form, "parents": list(self.parents), "rules": rules}
        if self.variable:
            out["variable"] = self.variable
        return out

    @classmethod
    def from_json(cls, name: str, data: Mapping) -> "DecisionFunction":
        parents = tuple(data.get("parents", ()))
        rules = {}
        for entry in data["rules"]:
            config = tuple(entry["when"][p] for p in parents)
            if "argmax" in entry:
                rules[config] = Rule(argmax=float(entry["argmax"]), value=entry.get("value"))
            elif "intervals" in entry:
                rules[config] = Rule(intervals=tuple((_unnum(lo), _unnum(hi), alt)
                                                     for lo, hi, alt in entry["intervals"]))
            else:
                rules[config] = Rule(choice=entry["choice"])
        return cls(name, data["form"], parents, rules, data.get("variable"))


@dataclass(frozen=True)
class Strategy:
    functions: Mapping[str, DecisionFunction]
    root_value: float
    diagnostics: tuple = field(default=(), compare=False)
    captures: Mapping = field(default_factory=dict, compare=False)

    def __getitem__(self, name: str) -> DecisionFunction:
        return self.functions[name]
