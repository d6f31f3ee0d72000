"""Exception types shared across the solver stack."""


class LayeredOcpError(Exception):
    """Base class for all package errors."""


class DivergenceError(LayeredOcpError):
    """A simulated trajectory left the finite/bounded region.

    Carries the timestep at which the blow-up was detected.
    """

    def __init__(self, timestep: int, message: str = ""):
        self.timestep = timestep
        super().__init__(message or f"trajectory diverged at timestep {timestep}")


class InfeasibleConstraintError(LayeredOcpError):
    """A per-timestep constraint set is empty or contradictory."""

    def __init__(self, timestep: int, message: str = ""):
        self.timestep = timestep
        super().__init__(message or f"infeasible constraint at timestep {timestep}")


class UnsupportedCostError(LayeredOcpError):
    """The requested operation needs a cost structure the input does not have."""
