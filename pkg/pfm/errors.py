# errors.py

from typing import Any, List, Optional


class PFMError(Exception):

    """Base class for every error raised by the pfm package."""

    exit_code = 7


class ParseError(PFMError):
    exit_code = 2


class ParameterError(PFMError):
    exit_code = 2


class ConfigError(PFMError):
    exit_code = 2


class UnknownCase(PFMError):
    exit_code = 2


class IrregularSingularityError(PFMError):
    pass


class ExponentRecognitionError(PFMError):
    pass


class RootFindingError(PFMError):
    exit_code = 3


class ObstructionError(PFMError):

    """Recurrence obstruction inconsistent with the exponent multiplicities."""


class EvaluationDomainError(PFMError):

    """Evaluation point too close to the boundary of a local disk."""

    exit_code = 3


class NoRationalFound(PFMError):
    pass


class SingularMatrixError(PFMError):
    exit_code = 3


class NoAdmissibleChain(PFMError):
    exit_code = 3


class ConvergenceError(PFMError):

    """
    Raised when adaptive refinement exhausts its budget.

    Parameters:
        message (str): Human readable description.
        best (Any, optional): Best available estimate (usually a matrix).
        history (List[float], optional): Successive refinement discrepancies.
    """

    exit_code = 3

    def __init__(self, message: str, best: Any = None, history: Optional[List[float]] = None):
        super().__init__(message)
        self.best = best
        self.history = list(history or [])


class NotRawForm(PFMError):
    exit_code = 4


class NonIntegerInvariant(PFMError):

    exit_code = 5

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class NotInLevelFamily(PFMError):
    exit_code = 6
