"""Exception types shared across the package."""


class SudlerError(Exception):
    """Base class for all package errors."""


class BudgetExceeded(SudlerError):
    """A requested evaluation needs more factors than the configured budget."""

    def __init__(self, needed, budget):
        self.needed = needed
        self.budget = budget
        super().__init__(f"evaluation needs {needed} factors, budget is {budget}")


class DigitRuleError(SudlerError, ValueError):
    """An Ostrowski digit sequence violates one of the three digit rules."""

    def __init__(self, rule, index, message):
        self.rule = rule
        self.index = index
        super().__init__(f"rule {rule} violated at c_{index}: {message}")


class FactorizationUndefined(SudlerError, ValueError):
    """C_n(beta, eps) has a non-positive radicand for the requested eps."""


class InvalidInterval(SudlerError, ValueError):
    """An interval handed to a certificate contains a root of the limit function."""
