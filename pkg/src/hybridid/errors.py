"""Exception hierarchy."""


class HybridIDError(Exception):
    """Base class for all solver errors."""


class MOPError(HybridIDError):
    pass


class UnboundedIntegralError(MOPError):
    """Integration over a piece that is unbounded in the integration variable."""


class NonRectangularError(MOPError):
    """An operation would need a region that is neither a box nor a box cut by
    affine bands eliminable by the next integration."""


class UnsupportedScopeError(MOPError):
    pass


class ScopeConflictError(MOPError):
    pass


class EmptyMaximizationError(MOPError):
    pass


class NonPositiveMassError(MOPError):
    pass


class DivisionNotClosed(HybridIDError):
    """The quotient of two MOP entries is not itself a MOP."""


class ParametricMaximizationError(HybridIDError):
    """Maximizing a continuous decision whose utility still depends on other
    continuous variables."""


class PotentialError(HybridIDError):
    pass


class ValidationError(HybridIDError):
    """Structural problems in a diagram; ``problems`` holds ``(location, message)``."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"{loc}: {msg}" for loc, msg in self.problems))


class PlanError(HybridIDError):
    pass


class SolveError(HybridIDError):
    """Wraps a failure with the elimination step where it happened."""

    def __init__(self, step, variable, cause):
        self.step = step
        self.variable = variable
        self.cause = cause
        super().__init__(f"step {step} (eliminating {variable}): {type(cause).__name__}: {cause}")


class UnsamplableError(HybridIDError):
    pass
