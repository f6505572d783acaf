"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Input array has the wrong shape, length, or non-finite entries."""


class DomainError(ValueError):
    """A parameter lies outside the domain where the operation is defined."""


class SolverError(RuntimeError):
    """A sparse recovery solver could not proceed.

    The ``diagnostics`` dict carries whatever state was available when the
    failure was detected (iteration, support, pivot magnitude, ...).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class GenerationError(RuntimeError):
    """A measurement ensemble could not be generated with full rank."""
