"""Exception types shared across the simulation and control layers."""


class PronkError(Exception):
    """Base class for all library errors."""


class PhaseMismatchError(PronkError):
    """Operation applied to a state in the wrong hybrid phase."""


class SingularConfigurationError(PronkError):
    """Leg length collapsed to zero (or below) during stance."""


class OutOfWorkspaceError(PronkError):
    """Kinematic query outside the leg workspace (e.g. toe above hip)."""


class InfeasibleControlError(PronkError):
    """Stride input cannot be realized from the current apex state."""


class InfeasiblePlacementError(PronkError):
    """A leg cannot reach its commanded touchdown position."""


class NoEventError(PronkError):
    """Integration reached the time horizon without triggering a guard."""


class SimulationFault(PronkError):
    """A state invariant was violated mid-simulation (crash, inversion, ...)."""

    def __init__(self, reason: str, time: float = float("nan"), state=None):
        super().__init__(reason)
        self.reason = reason
        self.time = time
        self.state = state


class DivergedError(PronkError):
    """Fixed-point iteration failed to converge."""

    def __init__(self, msg: str, last_iterate=None):
        super().__init__(msg)
        self.last_iterate = last_iterate


class ConfigError(PronkError):
    """Invalid or missing experiment configuration."""
