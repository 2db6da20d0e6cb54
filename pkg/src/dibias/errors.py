"""Exception hierarchy shared across the package."""


class DibiasError(Exception):
    """Base class for all package errors."""


class ValidationError(DibiasError, ValueError):
    pass


class NormalizationError(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class MaskError(ValidationError):
    pass


class SelectorError(ValidationError):
    pass


class DisjointnessError(ValidationError):
    pass


class HorizonError(ValidationError):
    pass


class DepthMismatchError(ValidationError):
    pass


class EmptySequenceError(ValidationError):
    pass


class SizeError(DibiasError):
    pass


class ReducibleChainError(DibiasError):
    pass


class ConvergenceError(DibiasError):
    pass
