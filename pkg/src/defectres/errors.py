"""Exception types shared across the package.

The CLI maps these onto process exit codes, so solver code should raise
the most specific type that applies rather than a bare ValueError.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """A run configuration or constructor argument violates a documented constraint."""


class PreconditionError(RuntimeError):
    """A mathematical precondition of a solver fails (margin collapse, wrong sign of E, ...)."""


class NonConvergenceError(RuntimeError):
    """An iteration exhausted its budget without meeting the stopping rule."""

    def __init__(self, message: str, iterates=None):
        super().__init__(message)
        self.iterates = iterates


class StepSizeUnderflow(RuntimeError):
    """The adaptive integrator drove its step below machine resolution."""

    def __init__(self, message: str, x: float | None = None):
        super().__init__(message)
        self.x = x
