"""Exception hierarchy shared by the solver modules and the CLI."""


class DividendBarrierError(Exception):
    """Base class for all package errors."""


class ConfigError(DividendBarrierError, ValueError):
    """Invalid parameters or run configuration."""


class DomainError(DividendBarrierError, ValueError):
    """Argument outside the domain of a formula."""


class UnsupportedCaseError(DividendBarrierError):
    """Closed forms are only available for case I (2*delta/mu < alpha)."""

    def __init__(self, case):
        self.case = case
        super().__init__(f"closed-form solution not available for {case.name} "
                         "(only CaseI, 2*delta/mu < alpha, is supported)")


class NumericalError(DividendBarrierError, ArithmeticError):
    """A numerical procedure failed (bracketing, convergence, degenerate pivot)."""


class BracketError(NumericalError):
    pass


class TruncationError(NumericalError):
    pass


class UnattainableRiskError(NumericalError):
    """The requested risk level cannot be met within the search range."""
