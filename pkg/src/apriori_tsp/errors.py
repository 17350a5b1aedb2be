"""Exception types shared across the package."""


class AprioriError(Exception):
    """Base class for package errors."""


class ValidationError(AprioriError, ValueError):
    """Input violates a documented precondition or invariant."""


class BudgetError(AprioriError):
    """A request exceeds a configured size or memory budget."""


class MemoCapExceeded(BudgetError):
    """Dynamic-programming memo grew past its cap."""
