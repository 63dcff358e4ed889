"""Exception hierarchy shared across the package."""


class CsoberError(Exception):
    """Base class for every error raised by csober."""


class DomainError(CsoberError, ValueError):
    """Inputs do not conform to the domain (shape or dimension mismatch)."""


class DegenerateInput(CsoberError, ValueError):
    """An input for which the requested quantity is undefined."""


class NumericalFailure(CsoberError, ArithmeticError):
    """A factorisation or decomposition could not be completed."""


class OracleError(CsoberError, RuntimeError):
    """A black-box oracle failed or refused the query."""


class DegenerateMeasure(CsoberError, ValueError):
    """An empirical measure carries no positive mass."""


class SolverStall(CsoberError, RuntimeError):
    """The LP solver hit its iteration limit."""


class DegenerateBatch(CsoberError, RuntimeError):
    """LP extraction left no point with positive weight."""


class EmptyAcceptance(CsoberError):
    """Every batch point was rejected. A valid outcome, reported as an error."""


class ConfigError(CsoberError, ValueError):
    """Invalid run configuration."""
