# daf_numerics/utils/errors.py

from typing import Any, Optional


class DafNumericsError(Exception):
    """Base class. ``exit_code`` is what the CLI returns when the error escapes a pipeline."""

    exit_code: int = 2

    def __init__(self, message: str, witness: Optional[Any] = None):
        super().__init__(message)
        self.witness = witness


class InvalidInputError(DafNumericsError, ValueError):
    exit_code = 4


class UsageError(DafNumericsError):
    exit_code = 64


class ModelViolationError(DafNumericsError):
    """A numerical bound of the construction failed; usually lambda, kappa or delta' were mis-estimated."""

    exit_code = 2


class CertificationError(ModelViolationError):
    pass


class TangencyError(ModelViolationError):
    pass


class TubeOverlapError(ModelViolationError):
    pass


class TransformStepError(ModelViolationError):
    pass


class IntegrationError(ModelViolationError):
    """Raised when a traced tangent leaves its cone or flips orientation."""


class HolonomyError(ModelViolationError):
    pass


class IntersectionError(ModelViolationError):
    pass


class NoIntersectionError(IntersectionError):
    pass


class AmbiguousIntersectionError(IntersectionError):
    pass


class ConvergenceError(DafNumericsError):
    exit_code = 3


class ScaleNotFoundError(DafNumericsError):
    exit_code = 3


class ResolutionError(DafNumericsError):
    exit_code = 3
