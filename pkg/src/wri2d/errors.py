"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: validation errors exit 2, numerical
failures exit 3, file problems exit 4.
"""


class ValidationError(ValueError):
    """Bad user input: models, surveys, configs, geometry."""


class NumericalError(RuntimeError):
    """A solve failed in a way that is not a usage error."""


class FactorizationError(NumericalError):
    """Sparse factorization broke down (singular or near-singular matrix)."""

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot
