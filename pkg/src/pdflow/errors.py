"""Exception hierarchy shared by all pdflow modules."""


class PDFlowError(Exception):
    """Base class for pdflow errors."""


class NotPositiveDefiniteError(PDFlowError, ValueError):
    pass


class DegenerateCongruenceError(PDFlowError, ValueError):
    pass


class ParameterError(PDFlowError, ValueError):
    """A distribution or operator parameter is outside its admissible range."""


class DomainError(PDFlowError, ValueError):
    """A special function was evaluated outside its convergence domain."""


class EvaluationError(PDFlowError, RuntimeError):
    """A user-supplied function failed or returned a non-finite value."""


class StiffDriftError(PDFlowError, RuntimeError):
    """The drift step could not keep the state inside the cone."""


class ConeExitError(PDFlowError, RuntimeError):
    """An ODE trajectory left the positive definite cone."""


class ConvergenceError(PDFlowError, RuntimeError):
    pass


class ConfigError(PDFlowError, ValueError):
    """Invalid configuration file; ``lineno`` is 1-based when known."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
