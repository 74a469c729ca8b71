"""Exception types shared across the package."""


class SpinSystemError(Exception):
    """Base class for every error raised by spinmid."""


class ConfigurationError(SpinSystemError):
    """Invalid parameters, mismatched dimensions, or malformed settings."""


class SingularRayError(SpinSystemError):
    """A spin vector is too close to the origin for ray operations."""


class AntipodalError(SpinSystemError):
    """A chordal midpoint degenerates: w_i + W_i is numerically zero."""


class GeometryError(SpinSystemError):
    """A geodesic construction left its injectivity domain."""


class SolverSingularError(SpinSystemError):
    """Newton iteration hit a singular Jacobian."""


class StepError(SpinSystemError):
    """A single integrator step failed (non-convergence or geometry guard)."""


class TrajectoryError(StepError):
    """A step failed mid-run; carries the step index and the partial trajectory."""

    def __init__(self, step_index, cause, partial=None):
        super().__init__(f"step {step_index} failed: {cause}")
        self.step_index = step_index
        self.cause = cause
        self.partial = partial
