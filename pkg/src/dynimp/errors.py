class ConfigError(ValueError):
    """Invalid input or configuration (CLI exit code 2)."""


class CapabilityError(RuntimeError):
    """Requested operation exceeds a size guard (dense path too large, ...)."""


class NumericalError(RuntimeError):
    """Numerical failure (CLI exit code 3)."""


class KrylovConvergenceError(NumericalError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual estimate {residual:.3e})")
        self.residual = residual


class FitError(ValueError):
    pass


class AmbiguousSpectrumError(NumericalError):
    def __init__(self, message: str, gaps):
        super().__init__(message)
        self.gaps = gaps
