"""Hybrid influence diagrams solved exactly on mixture-of-polynomials potentials."""
from hybridid.distributions import DistributionSpec, normal_mop, std_normal_mop
from hybridid.errors import (HybridIDError, MOPError, PlanError, PotentialError, SolveError,
                             UnsamplableError, ValidationError)
from hybridid.model import (EliminationPlan, InfluenceDiagram, from_dict, load_diagram,
                            parse_diagram, plan_elimination, serialize)
from hybridid.mop import MOP
from hybridid.oracle import OracleEstimate, grid_search, mc_evaluate
from hybridid.policy import DecisionFunction, Rule, Strategy
from hybridid.polynomial import Polynomial
from hybridid.solver import evaluate_strategy, solve

__all__ = [
    "DecisionFunction", "DistributionSpec", "EliminationPlan", "HybridIDError", "InfluenceDiagram",
    "MOP", "MOPError", "OracleEstimate", "PlanError", "Polynomial", "PotentialError", "Rule",
    "SolveError", "Strategy", "UnsamplableError", "ValidationError", "evaluate_strategy",
    "from_dict", "grid_search", "load_diagram", "mc_evaluate", "normal_mop", "parse_diagram",
    "plan_elimination", "serialize", "solve", "std_normal_mop",
]
