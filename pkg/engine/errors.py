"""Exception hierarchy for the toolkit."""


class GfNomaError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigError(GfNomaError):
    """Invalid or unreadable configuration."""


class CheckpointMissing(GfNomaError):
    """A neural detector was requested without a readable checkpoint."""


class FileError(GfNomaError):
    """An input file is missing or an output file cannot be written."""


class NonPrimitivePolynomial(GfNomaError):
    """The polynomial does not generate the full multiplicative group."""


class DivisionByZero(GfNomaError, ZeroDivisionError):
    """Inversion of the zero field element."""


class InvalidCapability(GfNomaError):
    """Error-correction capability T incompatible with the field."""


class MessageOutOfRange(GfNomaError):
    """Message index outside [1, n]."""


class InvalidZcParams(GfNomaError):
    """Zadoff-Chu root/length combination is not allowed."""


class LengthMismatch(GfNomaError):
    """Vectors whose lengths must agree do not."""


class BudgetExceeded(GfNomaError):
    """Exhaustive subset enumeration exceeds the configured budget."""


class DivergenceDetected(GfNomaError):
    """Training loss became non-finite."""


class InfeasibleGrid(GfNomaError):
    """No power-grid point satisfies the ordering constraints."""


class InvalidLayerPlan(GfNomaError):
    """Layer powers violate ordering, ceiling or layer-count limits."""
