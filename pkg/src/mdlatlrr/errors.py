"""Exception hierarchy. The CLI maps each family to an exit code."""


class MDLatLRRError(Exception):
    """Base class for all package errors."""


class ArgumentError(MDLatLRRError, ValueError):
    """Invalid argument value or inconsistent shapes (CLI exit code 2)."""


class StructuralError(ArgumentError):
    """A container's metadata disagrees with its payload."""


class DataError(MDLatLRRError):
    """Unreadable, malformed or insufficient input data (CLI exit code 3)."""


class PoolSizeError(DataError):
    """A classified patch pool holds fewer patches than requested."""

    def __init__(self, label: str, available: int, requested: int):
        self.label = label
        self.available = available
        self.requested = requested
        super().__init__(f"{label} pool {available} < {requested}")


class NumericalError(MDLatLRRError, ArithmeticError):
    """Solver divergence or factorization failure (CLI exit code 4)."""

    def __init__(self, message: str, iteration: int | None = None):
        self.iteration = iteration
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)


class SVDConvergenceError(NumericalError):
    """The SVD backend did not converge."""
