"""Exception hierarchy shared by all modules."""


class FlexArrayError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(FlexArrayError, ValueError):
    """Malformed or inconsistent experiment configuration."""


class DomainError(FlexArrayError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class FarFieldError(DomainError):
    """Observation radius is too small for the far-field summation."""


class InvalidExcitationError(DomainError):
    """All excitation currents vanish where a nonzero drive is needed."""


class InvalidImpedanceError(DomainError):
    """Impedances for which a mismatch or power ratio is undefined."""


class FramingError(DomainError):
    """Bit stream length is not a whole number of QAM symbols."""


class NumericError(FlexArrayError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance."""


class ConvergenceError(NumericError):
    """Quadrature or search did not converge.

    Attributes
    ----------
    diagnostics : dict
        Iteration history (orders tried, values, relative changes).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
