"""Exception types shared across the package."""


class StochNHError(Exception):
    """Base class for all package-specific errors."""


class UnsupportedOrder(StochNHError):
    """Derivative order above the implementation cap (n > 4)."""


class EmptyModel(StochNHError):
    """Model has no deterministic operator terms."""


class GridMismatch(StochNHError):
    """Operator and wave function live on different grids."""


class UnderResolved(StochNHError):
    """Initial packet narrower than the grid can represent (sigma0 < 4 dx)."""


class BoundaryOverlap(StochNHError):
    """Packet mass touching the periodic boundary; moments are unreliable."""


class BadInterval(StochNHError):
    """Invalid time interval for path generation."""


class IndivisibleFactor(StochNHError):
    """Coarsening factor does not divide the fine step count."""


class TooLarge(StochNHError):
    """Dense materialization requested above the size cap."""


class PastCollapse(StochNHError):
    """Closed-form width denominator non-positive: t beyond the collapse time t_c."""

    def __init__(self, t, t_c):
        super().__init__(f"t = {t} is at or beyond the collapse time t_c = {t_c}")
        self.t = t
        self.t_c = t_c


class NegativeWidth(StochNHError):
    """D_R <= 0: the stochastic closed form has left the physical regime."""


class DegenerateDensity(StochNHError):
    """All amplitudes zero; no density to summarize."""


class ExpectationBlowup(StochNHError):
    """An expectation value in the normalized equation exceeded 1e12."""


class InsufficientData(StochNHError):
    """Not enough late-time points to classify the broadening regime."""


class AllTrajectoriesTerminated(StochNHError):
    """Every trajectory in the ensemble terminated before t_final."""


class UnsupportedModel(StochNHError):
    """Requested representation cannot handle this model's terms."""


class ConfigError(StochNHError):
    """Invalid or unknown configuration key/value."""
