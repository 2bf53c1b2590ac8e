"""Exception types shared across the package.

Exit-code mapping used by the CLI: ValidationError -> 1,
ResourceLimitError -> 2, verification failures -> 3.
"""


class ValidationError(ValueError):
    """Bad input: out-of-range site, malformed config, non-Hermitian matrix, ..."""


class UnsupportedModelError(ValidationError):
    """Model has no representation in the requested engine (e.g. quartic fermion terms)."""


class ResourceLimitError(RuntimeError):
    """A configured size / enumeration / time budget would be exceeded."""

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or {}


class FitConvergenceError(RuntimeError):
    """No optimizer start converged; carries per-start diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class DegenerateMagnetizationError(ValidationError):
    """Binder cumulant on a state with vanishing squared magnetization."""
