"""Exception hierarchy shared across the package."""


class CouetteKSError(Exception):
    """Base class for all package errors."""


class QuadratureNotConverged(CouetteKSError):
    pass


class WrongAlpha(CouetteKSError, ValueError):
    pass


class NotConjugateSymmetric(CouetteKSError, ValueError):
    pass


class RemapOffSchedule(CouetteKSError):
    pass


class StepUnderflow(CouetteKSError):
    pass


class NonFinite(CouetteKSError, FloatingPointError):
    pass


class NonPositiveData(CouetteKSError, ValueError):
    pass


class DomainError(CouetteKSError, ValueError):
    pass


class MismatchedExperiments(CouetteKSError, ValueError):
    pass


class GridTooSmall(CouetteKSError):
    pass


class ParseError(CouetteKSError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(CouetteKSError, ValueError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class FormatError(CouetteKSError, ValueError):
    pass
