"""Exception types shared across the planner."""


class ParameterError(ValueError):
    """A caller-supplied parameter is out of its documented range."""


class BracketError(RuntimeError):
    """Root finding was asked to search an interval with no sign change."""


class FitError(RuntimeError):
    """Quadratic fit of the path-loss curve produced a non-convex parabola."""

    def __init__(self, message, raw_coefficients=None):
        super().__init__(message)
        self.raw_coefficients = raw_coefficients


class CoverageError(RuntimeError):
    """A device cannot be served by any candidate node under the active threshold."""

    def __init__(self, message, device=None, epoch=None):
        super().__init__(message)
        self.device = device
        self.epoch = epoch


class InfeasibleRegionError(RuntimeError):
    """A set of disc constraints has empty intersection."""


class SolverError(RuntimeError):
    """A numeric subproblem failed to converge; carries a diagnostic payload."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class StateError(RuntimeError):
    """Pipeline state is internally inconsistent (bad schedule, zero gain on an active link, ...)."""
