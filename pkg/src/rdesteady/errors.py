"""Exception hierarchy."""


class RdeError(Exception):
    """Base class for all errors raised by rdesteady."""


class DomainError(RdeError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ContractError(RdeError, ValueError):
    """Inputs violate an operation's preconditions (shape, flags, specs)."""


class SamplingError(RdeError):
    """Latin hypercube redraw budget exhausted."""


class EvaluationError(RdeError, ArithmeticError):
    """A residual evaluated to a non-finite value.

    ``cell`` is the ``(i, j)`` index (x index, y index) and ``sample`` the row
    of the sample matrix at which it happened.
    """

    def __init__(self, message, cell=None, sample=None):
        super().__init__(message)
        self.cell = cell
        self.sample = sample


class DegeneratePosteriorError(RdeError):
    """No probability mass on the evaluation grid."""


class IntegrationBlowUpError(RdeError, ArithmeticError):
    """ODE state became non-finite."""


class GridParseError(RdeError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class VerificationWarning(UserWarning):
    """Verification run dominated by solver failures."""
