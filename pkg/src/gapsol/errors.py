"""Exception hierarchy. ConfigError maps to CLI exit code 2, the
numerical failures to exit code 3."""


class GapsolError(Exception):
    """Base class for all library errors."""


class ConfigError(GapsolError):
    """Invalid configuration key, value, or preset."""


class GridError(GapsolError):
    """Grid construction or grid-compatibility violation."""


class NoGapError(GapsolError):
    """Requested spectral gap is closed or absent."""


class FlatBandError(GapsolError):
    """Band curvature too small to define an effective mass."""


class EigenSolverError(GapsolError):
    """Dense eigensolver failed to converge."""


class ConvergenceError(GapsolError):
    """Newton iteration failed; carries the last residual and iterate."""

    def __init__(self, message, residual=None, iterations=None, partial=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.partial = partial


class TrivialSolutionError(GapsolError):
    """Newton converged to the zero field."""


class ContinuationError(GapsolError):
    """Family continuation aborted; carries the partial branch."""

    def __init__(self, message, partial_branch=None, failed_mu=None):
        super().__init__(message)
        self.partial_branch = partial_branch
        self.failed_mu = failed_mu


class PropagationError(GapsolError):
    """Time propagation produced non-finite values; carries the last
    healthy time and the partial trajectory."""

    def __init__(self, message, last_healthy_time=None, partial=None):
        super().__init__(message)
        self.last_healthy_time = last_healthy_time
        self.partial = partial


class SizeGuardError(GapsolError):
    """Dense-propagator grid-size guard (N <= 256) violated."""
