"""Exception types raised by the simulator."""


class XbarError(Exception):
    """Base class for simulator errors."""


class DegenerateCircuitError(XbarError):
    """The resistive network has no unique solution (floating node or shorted source)."""


class ConvergenceError(XbarError):
    """An iterative solve did not reach its tolerance within the iteration budget."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class StaleCacheError(XbarError):
    """A distortion cache was used after its refresh interval elapsed."""


class CalibrationError(XbarError):
    """ADC calibration was requested before any observation was recorded."""


class ConfigError(XbarError):
    """Invalid or inconsistent experiment configuration."""


class MissingActivationsError(XbarError):
    """backward() was called on a layer with no cached forward activations."""
