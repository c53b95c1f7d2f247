"""Exception hierarchy for vctrl."""


class VctrlError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(VctrlError, ValueError):
    """Invalid model parameter or control value."""


class IntegrationDivergedError(VctrlError, ArithmeticError):
    """A non-finite state was produced during integration."""

    def __init__(self, t: float, message: str | None = None):
        self.t = float(t)
        super().__init__(message or f"integration diverged at t={self.t:.6g}")


class ConfigError(VctrlError, ValueError):
    """Malformed or invalid run configuration."""

    def __init__(self, message: str, *, line: int | None = None, key: str | None = None):
        self.detail = message
        self.line = line
        self.key = key
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if key is not None:
            prefix += f"{key}: "
        super().__init__(prefix + message)
