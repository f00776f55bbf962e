"""Exception hierarchy shared by the library and the CLI."""


class AoaPlaError(Exception):
    """Base class for all errors raised by aoa_pla_lab."""


class DomainError(AoaPlaError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedGeometryError(DomainError):
    """The array geometry cannot support the requested bound (e.g. M < 2)."""


class DegenerateCurvatureError(AoaPlaError, ArithmeticError):
    """D(theta) is numerically zero, so the MCRB is undefined."""


class ConfigurationError(AoaPlaError, ValueError):
    """A scenario or configuration file is inconsistent.

    ``field`` carries a dotted path (``array.num_elements``) when the error
    can be traced to one entry of a config file.
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class ConvergenceError(AoaPlaError, RuntimeError):
    """A 1-D search failed to produce a converged interior optimum."""
