"""Exception hierarchy.

Everything deriving from :class:`NumericalError` is a hard failure: results
computed past that point would be unreliable, and the CLI maps it to exit
status 3. Assumption violations on the landscape are *not* errors; they are
recorded as flags on the report.
"""


class NumericalError(RuntimeError):
    """Base class for hard numerical failures."""


class NoConvergence(NumericalError):
    """Newton iteration exceeded its iteration cap."""


class SaddleRefinementFailed(NumericalError):
    """Newton refinement from a merge cell did not reach an index-1 point."""


class ResolutionTooCoarse(NumericalError):
    """Two minima fall into the same grid cell."""


class ResolutionGuardFailed(NumericalError):
    """Grid spacing too large for the requested inverse temperature."""

    def __init__(self, message, h_bound=None):
        super().__init__(message)
        self.h_bound = h_bound


class SolverStagnation(NumericalError):
    """The eigensolver did not converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class GridMismatch(NumericalError):
    """A measure lives on a different grid than the operator."""


class CutoffOverlap(NumericalError):
    """Cut-off balls around critical points intersect or leave the box."""


class DeltaTooLarge(NumericalError):
    """The delta-core of a well does not contain its minimum."""


class UnstableStep(NumericalError):
    """A Langevin increment exceeded half the box diameter."""


class DegenerateInput(ValueError):
    """A Hessian eigenvalue is too close to zero."""


class AssumptionViolated(ValueError):
    """A quantity is undefined because a landscape assumption failed."""
