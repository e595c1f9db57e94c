"""Exception hierarchy shared by all qmetro modules."""


class QMetroError(Exception):
    """Base class for every error raised by qmetro."""


class ParameterError(QMetroError, ValueError):
    """An argument is outside the domain an operation accepts."""


class InconsistencyError(QMetroError):
    """A value contradicts a physical bound (e.g. QFI above N**2)."""


class EstimationError(QMetroError):
    """Phase estimation is impossible for the given sample."""


class FitError(QMetroError):
    """Calibration fit failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ValidationError(QMetroError, ValueError):
    """A density matrix read from disk failed a physical check."""

    def __init__(self, check, magnitude, message=None):
        self.check = check
        self.magnitude = magnitude
        super().__init__(message or f"{check} {_fmt(magnitude)}")


class ConfigError(QMetroError, ValueError):
    """An experiment configuration is malformed."""


def _fmt(x):
    x = abs(float(x))
    return f"{x:.2f}" if x >= 0.01 else f"{x:.2e}"


class FormatError(QMetroError, ValueError):
    """A file could not be parsed."""
