class KKFError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(KKFError, ValueError):
    """Invalid configuration; ``key`` is the dotted path of the offending entry."""

    def __init__(self, message: str, key: str | None = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class NumericalError(KKFError, ArithmeticError):
    """A numerical failure (singular matrix, non-finite value) at a known step."""

    def __init__(self, message: str, step: int | None = None):
        self.step = step
        super().__init__(f"step {step}: {message}" if step is not None else message)


class SimulationError(NumericalError):
    pass
