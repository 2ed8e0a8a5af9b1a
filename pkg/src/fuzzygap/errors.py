"""Exception hierarchy shared by the library and the CLI."""


class FuzzyGapError(Exception):
    """Base class for all package errors."""


class ValidationError(FuzzyGapError, ValueError):
    """Bad input: a precondition or configuration constraint was violated."""


class NumericalError(FuzzyGapError, RuntimeError):
    """A numerical routine failed to converge or produced an unusable result."""


class ConvergenceError(NumericalError):
    pass


class FitError(NumericalError):
    pass
