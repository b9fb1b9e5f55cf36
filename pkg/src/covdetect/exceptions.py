"""Exception types raised by covdetect."""


class CovDetectError(Exception):
    """Base class for package errors."""


class NumericalError(CovDetectError, ArithmeticError):
    """A factorization or update broke down (e.g. a covariance lost definiteness)."""


class InconclusiveError(CovDetectError, RuntimeError):
    """A feasibility test could not reach a verdict (solver hit its iteration cap).

    The partial solver state is kept in ``diagnostics`` so callers can log it.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ConfigError(CovDetectError, ValueError):
    """Invalid experiment configuration. ``lineno`` points into the config file."""

    def __init__(self, message, lineno=None, path=None):
        self.lineno = lineno
        self.path = path
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
        if lineno is not None:
            prefix = f"{prefix}{lineno}: "
        elif prefix:
            prefix += " "
        super().__init__(prefix + message)
