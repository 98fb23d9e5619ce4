"""Exception and warning types raised across the package."""


class RiskCLTError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(RiskCLTError, ValueError):
    pass


class DomainEscape(RiskCLTError):
    """An intermediate mean left its declared box.

    ``stage`` is the 1-based index j of the box I_j that was violated.
    """

    def __init__(self, stage, value=None, box=None):
        self.stage = stage
        self.value = value
        self.box = box
        msg = f"intermediate mean for stage {stage} left its domain box"
        if value is not None:
            msg += f": value={value!r}, box={box!r}"
        super().__init__(msg)


class MissingJacobian(RiskCLTError):
    pass


class ParameterOutOfRange(RiskCLTError, ValueError):
    pass


class SolverFailure(RiskCLTError):
    pass


class DegenerateSample(RiskCLTError):
    pass


class DegenerateInput(RiskCLTError, ValueError):
    pass


class IntegrationFailure(RiskCLTError):
    pass


class ParseError(RiskCLTError, ValueError):
    pass


class NonUniqueMinimizer(UserWarning):
    """The inner minimization appears to have several optimal points."""


class FlatQuantileWarning(UserWarning):
    """The empirical CDF is flat at the AVaR quantile level."""
