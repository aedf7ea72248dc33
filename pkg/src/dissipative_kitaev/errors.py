"""Exception hierarchy shared by all modules."""


class KitaevError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(KitaevError, ValueError):
    """Physical parameters outside their allowed range."""


class PreconditionError(KitaevError, ValueError):
    """An operation was called outside its domain (e.g. N not divisible by 4)."""


class ResourceError(KitaevError, MemoryError):
    """Requested size exceeds a configured cap."""


class ConsistencyError(KitaevError, RuntimeError):
    """An internal identity that must hold exactly was violated."""


class NumericalError(KitaevError, ArithmeticError):
    """An eigensolver or integrator failed to deliver a trustworthy result."""


class AnalysisError(KitaevError, ValueError):
    """Post-processing of a trajectory could not be performed."""


class ParseError(KitaevError, ValueError):
    """Malformed input file."""
