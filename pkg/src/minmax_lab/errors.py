"""Exception types shared across the package."""


class MinMaxLabError(Exception):
    """Base class for package errors."""


class InfeasibleError(MinMaxLabError):
    """A polytope or constraint slice is empty."""


class PromiseViolation(MinMaxLabError):
    """An instance breaks a promise it was declared to keep (e.g. empty slices)."""


class ConvergenceError(MinMaxLabError):
    """An iterative routine ran out of budget."""


class SchemaError(MinMaxLabError):
    """A JSON document does not match the expected schema."""
