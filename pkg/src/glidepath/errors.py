"""Exception hierarchy.

Configuration problems (bad parameters, horizons, grids) derive from
``ParameterError``; runtime numerical failures derive from ``NumericError``.
Both roots subclass the builtin types most callers already catch.
"""


class GlidepathError(Exception):
    """Base class for all library errors."""


class ParameterError(GlidepathError, ValueError):
    """A model parameter or configuration value is invalid."""


class HorizonError(ParameterError):
    """A time horizon is non-positive or otherwise unusable."""


class MaturityError(ParameterError):
    """A bond maturity lies in the past relative to the valuation date."""


class RiskAversionError(ParameterError):
    """Risk aversion must be a finite positive scalar."""


class GridError(ParameterError):
    """A sampling grid is too coarse for the requested operation."""


class NumericError(GlidepathError, RuntimeError):
    """A numerical procedure failed to reach its accuracy contract."""

    def __init__(self, message, achieved_error=None):
        super().__init__(message)
        self.achieved_error = achieved_error


class DegenerateDiscriminantError(NumericError):
    """The spectral discriminant vanishes; latent roots would coincide."""


class LatentVectorError(NumericError):
    """Latent vectors are numerically degenerate (singular Q)."""


class SingularSystemError(NumericError):
    """A structurally invertible small linear system is numerically singular."""


class IllConditionedBoundaryError(NumericError):
    """The boundary block system is too ill-conditioned to solve reliably."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ConsistencyError(NumericError):
    """An internal identity failed, signalling a formula transcription bug."""


class SimulationError(NumericError):
    """A Monte Carlo path produced a non-finite value."""

    def __init__(self, message, path_index=None, step=None):
        super().__init__(message)
        self.path_index = path_index
        self.step = step
