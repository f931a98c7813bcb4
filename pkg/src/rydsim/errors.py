"""Exception types raised across the package."""


class InvalidParameterError(ValueError):
    """A physical or numerical input is outside its valid domain."""


class ConvergenceError(RuntimeError):
    """An iterative routine (integrator or solver) did not converge.

    Attributes
    ----------
    residual : float
        Best residual (or achieved tolerance) at the point of failure.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class FitError(RuntimeError):
    """A least-squares fit failed or its design was degenerate."""


class IllConditionedFitError(FitError):
    """The data do not constrain the model (e.g. only one regime sampled)."""
