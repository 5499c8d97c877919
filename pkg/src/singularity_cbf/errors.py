"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """Raised when an argument breaks a documented precondition (shape, symmetry, ...)."""


class ConfigurationError(ValueError):
    """Raised for missing or inconsistent user-supplied parameters."""


class IntegrationBlowup(FloatingPointError):
    """A simulation step produced a non-finite state."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class NondifferentiablePoint(ArithmeticError):
    """Requested eigenvalue is (numerically) repeated, so it has no gradient here."""


class SingularCost(ArithmeticError):
    """QP cost matrix is not positive definite; the filter itself sits at a singularity."""


class QPInfeasible(RuntimeError):
    """The active-set solver certified that the constraint set is inconsistent."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class UnsupportedParameters(ValueError):
    """A closed-form routine was called outside the parameter range it was derived for."""


class ScenarioFailed(RuntimeError):
    """A run finished but broke a runtime tolerance (e.g. too many infeasible QPs)."""
