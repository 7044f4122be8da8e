"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain of a function (e.g. a non-positive simplex weight)."""


class ConfigError(ValueError):
    """A learner, environment or sweep was configured with inconsistent parameters."""


class SolverError(ArithmeticError):
    """The mirror-descent solver failed to converge.

    Attributes:
        residual: KKT residual at the last iterate.
        round_index: round of the run in which the failure happened, if known.
    """

    def __init__(self, message, residual=float("nan"), round_index=None):
        super().__init__(message)
        self.residual = residual
        self.round_index = round_index
