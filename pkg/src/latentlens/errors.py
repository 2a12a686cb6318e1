"""Exception hierarchy shared by every latentlens module."""


class LatentLensError(Exception):
    """Base class for all errors raised by latentlens."""


class ParameterError(LatentLensError, ValueError):
    """An argument is outside its allowed domain."""


class FormatError(LatentLensError):
    """An input file or directory does not follow a supported layout."""


class GeometryError(LatentLensError):
    """Frame dimensions are inconsistent or unsuitable."""


class EmptyInputError(LatentLensError):
    """A clip or sequence has no frames."""


class RangeError(LatentLensError, ValueError):
    """Values or indices fall outside the permitted range."""


class ContractError(LatentLensError):
    """Two operands cannot be combined (geometry or domain mismatch)."""


class PreconditionError(LatentLensError):
    """An operation's documented precondition does not hold."""
