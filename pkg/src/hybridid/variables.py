"""Variable declarations shared by the model, potentials and solver."""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence


class VarKind(str, enum.Enum):
    CHANCE_DISCRETE = "chance-discrete"
    CHANCE_CONTINUOUS = "chance-continuous"
    CHANCE_DETERMINISTIC = "chance-deterministic"
    DECISION_DISCRETE = "decision-discrete"
    DECISION_CONTINUOUS = "decision-continuous"


@dataclass(frozen=True)
class DecisionConstraint:
    """Allowed alternatives of a decision per configuration of some predecessors.

    Configurations missing from ``rows`` allow every state.
    """

    parents: tuple[str, ...]
    rows: Mapping[tuple[str, ...], tuple[str, ...]] = field(default_factory=dict)

    def allowed(self, assignment: Mapping[str, str], states: Sequence[str]) -> tuple[str, ...]:
        key = tuple(assignment[p] for p in self.parents)
        return tuple(self.rows.get(key, tuple(states)))


@dataclass(frozen=True)
class Display:
    """How a variable is shown in reports, e.g. a log-price shown as a price."""

    name: str
    transform: str = "identity"

    def apply(self, x: float) -> float:
        if self.transform == "exp":
            return math.exp(x) if x < 700 else math.inf
        return x


@dataclass(frozen=True)
class Variable:
    name: str
    kind: VarKind
    states: tuple[str, ...] = ()
    interval: tuple[float, float] | None = None
    constraint: DecisionConstraint | None = None
    display: Display | None = None

    @property
    def is_decision(self) -> bool:
        return self.kind in (VarKind.DECISION_DISCRETE, VarKind.DECISION_CONTINUOUS)

    @property
    def is_chance(self) -> bool:
        return not self.is_decision

    @property
    def is_discrete(self) -> bool:
        return self.kind in (VarKind.CHANCE_DISCRETE, VarKind.DECISION_DISCRETE)

    @property
    def is_continuous(self) -> bool:
        return not self.is_discrete


def configurations(names: Sequence[str], states: Mapping[str, Sequence[str]]):
    """All joint configurations of ``names`` in lexicographic state order."""
    return itertools.product(*[states[n] for n in names])
