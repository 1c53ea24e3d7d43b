"""Exception types shared across the package."""


class SlabradError(Exception):
    """Base class for all library errors."""


class DomainError(SlabradError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class ModeSolverError(SlabradError):
    """Guided-mode search failed to resolve a mode that must exist."""


class PoleProximityError(SlabradError):
    """Spectral evaluation point sits on (or numerically at) a guided-mode pole."""


class ConvergenceError(SlabradError):
    """Oscillatory tail extrapolation did not reach the requested tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved relative residual {achieved:.3e})")
        self.achieved = achieved


class QuadratureError(SlabradError):
    """A Green's function evaluation failed for a specific emitter pair."""

    def __init__(self, pair: tuple[int, int], cause: Exception):
        super().__init__(f"Green's function failed for pair {pair}: {cause}")
        self.pair = pair
        self.cause = cause


class IntegrationError(SlabradError):
    """Master-equation propagation aborted before reaching the final time."""

    def __init__(self, message: str, t_reached: float):
        super().__init__(f"{message} (reached t = {t_reached:.6g})")
        self.t_reached = t_reached
