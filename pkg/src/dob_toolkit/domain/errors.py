from typing import List, Optional, Tuple


class ToolkitError(Exception):
    """Base class for errors raised by the toolkit."""


class ZeroPolynomial(ValueError):
    pass


class ConstantPolynomial(ValueError):
    pass


class ImproperTransferFunction(ValueError):
    pass


class PoleOnAxis(ToolkitError):
    """Frequency evaluation hit a pole on the imaginary axis."""

    def __init__(self, omega: float):
        super().__init__(f"pole on the imaginary axis at omega={omega:g} rad/s")
        self.omega = omega


class NoCrossing(ToolkitError):
    """Stability does not change inside the searched gain bracket."""

    def __init__(self, k_lo: float, k_hi: float, stable_side: str):
        super().__init__(
            f"no stability crossing in [{k_lo:g}, {k_hi:g}] (stable: {stable_side})"
        )
        self.k_lo = k_lo
        self.k_hi = k_hi
        self.stable_side = stable_side  # 'both' or 'neither'


class NotSettled(ToolkitError):
    pass


class NumericalBlowup(ToolkitError):
    def __init__(self, step: int, channel: str, value: float):
        super().__init__(f"{channel} diverged at step {step} (value {value:g})")
        self.step = step
        self.channel = channel
        self.value = value


class ConfigError(ValueError):
    """Invalid configuration; `diagnostics` holds (key_path, message) pairs."""

    def __init__(self, diagnostics: List[Tuple[str, str]], message: Optional[str] = None):
        self.diagnostics = list(diagnostics)
        if message is None:
            message = "; ".join(f"{key}: {msg}" for key, msg in self.diagnostics)
        super().__init__(message)


class InvalidScenario(ConfigError):
    pass
