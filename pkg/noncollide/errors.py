"""Exception hierarchy for noncollide.

Every error carries its details as attributes and pickles with them, so
errors raised in ensemble worker processes reach the caller intact.
"""

from typing import List, Optional


class NoncollideError(Exception):
    """Base class for all errors raised by noncollide."""


class SingularityError(NoncollideError, ArithmeticError):
    """A gap with an active interaction kernel is numerically zero."""

    def __init__(self, message: str, pair: Optional[tuple] = None, gap: Optional[float] = None):
        super().__init__(message)
        self.pair = pair
        self.gap = gap

    def __reduce__(self):
        return (type(self), (self.args[0], self.pair, self.gap))


class NonRealRoots(NoncollideError, ArithmeticError):
    """Root recovery found an imaginary part beyond tolerance."""

    def __init__(self, message: str, imag: float = float("nan"), tol: float = float("nan")):
        super().__init__(message)
        self.imag = imag
        self.tol = tol

    def __reduce__(self):
        return (type(self), (self.args[0], self.imag, self.tol))


class ExplosionError(NoncollideError, ArithmeticError):
    """State became non-finite or left every bounded region."""

    def __init__(self, message: str, time: float = float("nan")):
        super().__init__(message)
        self.time = time

    def __reduce__(self):
        return (type(self), (self.args[0], self.time))


class PathError(NoncollideError):
    """An ensemble path failed; wraps the original error."""

    def __init__(self, path_index: int, error: Exception):
        super().__init__(f"path {path_index}: {type(error).__name__}: {error}")
        self.path_index = path_index
        self.error = error

    def __reduce__(self):
        return (type(self), (self.path_index, self.error))


class ConfigError(NoncollideError, ValueError):
    """Run configuration is invalid. Lists every offending key."""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("Configuration errors:\n" + "\n".join(self.errors))

    def __reduce__(self):
        return (type(self), (self.errors,))


class UnsupportedPresetError(NoncollideError, ValueError):
    """Preset is unknown or has no closed form for the requested quantity."""
