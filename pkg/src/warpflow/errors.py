"""Exception hierarchy shared by every warpflow module."""


class WarpflowError(Exception):
    """Base class for all warpflow errors."""


class DomainError(WarpflowError, ValueError):
    """A height z lies outside the open domain of the warping function."""


class OrderError(WarpflowError, ValueError):
    """A derivative order above the family's ``max_order`` was requested."""


class HypothesisError(WarpflowError):
    """A structural hypothesis (sign or convexity margin) fails on the sampled range."""


class UnsupportedModel(WarpflowError):
    """The requested fibre model M is not supported by a formula."""


class StiffnessError(WarpflowError):
    """The adaptive ODE step size underflowed."""


class Inconclusive(WarpflowError):
    """Neither a finite-exit nor a global-existence certificate could be produced."""


class StepTooLarge(WarpflowError):
    """A time step violates the explicit stability bound."""


class DomainExit(WarpflowError):
    """A node of an evolving curve or hypersurface left the warping domain."""


class GraphLost(WarpflowError):
    """The angle function became nonpositive somewhere."""


class DegenerateSegment(WarpflowError):
    """Two adjacent nodes coincide to machine tolerance."""


class DegenerateGrid(DegenerateSegment):
    """The symmetric-graph grid is too coarse or malformed."""


class WindowTooShort(WarpflowError):
    """A residual window does not contain enough snapshots."""


class InitialConditionError(WarpflowError):
    """Initial data violate the hypotheses of the experiment."""


class ConfigError(WarpflowError, ValueError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class PinchDetected(WarpflowError):
    """The neck radius fell below the pinch threshold."""


class InconclusiveRun(WarpflowError):
    """A counterexample run hit its horizon without a decisive event."""
