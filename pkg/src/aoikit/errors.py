"""Exception types shared across the toolkit.

Validation problems are reported as data (lists of violation strings) by
``model.validate``; the exceptions here cover conditions that make a
requested computation impossible.
"""

from __future__ import annotations


class ModelValidationError(ValueError):
    """A model failed invariant checks required by an operation."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid model: " + "; ".join(self.violations))


class SingularMatrixError(ArithmeticError):
    """LU elimination hit a pivot below the working-precision threshold."""

    def __init__(self, pivot_index: int, pivot_magnitude: float):
        self.pivot_index = pivot_index
        self.pivot_magnitude = pivot_magnitude
        super().__init__(
            f"matrix is singular to working precision at pivot {pivot_index} "
            f"(|pivot| = {pivot_magnitude:.3e})"
        )


class NonErgodicError(ArithmeticError):
    """The discrete chain has no strictly positive stationary distribution."""

    def __init__(self, state: int, detail: str):
        self.state = state
        super().__init__(f"chain is not ergodic at working precision: {detail} (state {state})")


class ConvergenceError(ArithmeticError):
    """An iterative method exhausted its iteration budget."""

    def __init__(self, message: str, last_iterate=None):
        self.last_iterate = last_iterate
        super().__init__(message)


class UnstableModelError(ArithmeticError):
    """No non-negative first-moment fixed point exists, so stationary age
    statistics are undefined (ages grow without bound)."""


class MgfRadiusError(ValueError):
    """The MGF was requested at or beyond its region of convergence."""

    def __init__(self, s: float, radius: float):
        self.s = s
        self.radius = radius
        super().__init__(
            f"MGF argument s = {s:g} is outside the region of convergence "
            f"(radius s0 = {radius:g})"
        )


class TruncationError(ValueError):
    """A density grid is too short to hold the required probability mass."""

    def __init__(self, extent: float, suggested: float):
        self.extent = extent
        self.suggested = suggested
        super().__init__(
            f"grid extent {extent:g} cannot hold 1 - 1e-6 of the mass; "
            f"extend to at least {suggested:g}"
        )


class ConfigError(ValueError):
    """A simulation or integration configuration is unusable."""
