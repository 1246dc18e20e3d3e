"""Exception types shared across the workbench."""


class WavebenchError(Exception):
    """Base class for all workbench errors."""


class ShapeError(WavebenchError):
    """Fields live on incompatible grids or have mismatched shapes."""


class ArityError(WavebenchError):
    """Too few samples / probe points for the requested operation."""


class RangeError(WavebenchError):
    """A dyadic scale or frequency is outside the grid-representable range."""


class ResolutionError(WavebenchError):
    """The time window is too short to resolve the requested band."""


class DegenerateInputError(WavebenchError):
    """Input is identically zero (or vanishes somewhere it must not)."""


class DivergenceError(WavebenchError):
    """Time stepping produced NaN or blew up; carries the last valid state."""

    def __init__(self, message, last_state=None, step=None):
        super().__init__(message)
        self.last_state = last_state
        self.step = step


class ConfigError(WavebenchError):
    """A run configuration failed to parse or validate."""
