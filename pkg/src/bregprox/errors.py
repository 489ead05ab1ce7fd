"""Exception types shared across the package."""


class DomainError(ValueError):
    """A point lies outside the manifold, the feasible set or a Bregman zone."""


class ContractError(ValueError):
    """An argument violates an operation's precondition (shape, symmetry, base point)."""


class ParameterError(ValueError):
    """An invalid scalar parameter, e.g. a non-positive regularization weight."""


class ConvergenceError(RuntimeError):
    """An iterative solver exhausted its iteration budget.

    Attributes
    ----------
    partial : object
        Whatever partial result the solver had produced (a trace, a point).
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ConfigError(ValueError):
    """An experiment configuration that cannot be resolved or is infeasible."""
