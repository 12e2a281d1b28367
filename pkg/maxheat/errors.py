"""Exception hierarchy. Each class carries the exit code the CLI returns for it."""

from typing import List, Optional, Sequence


class MaxHeatError(Exception):
    exit_code = 1


class ConfigError(MaxHeatError):
    """A configuration value is missing, malformed or physically inadmissible.

    Parameters
    ----------
    message : str
        Human readable description.
    key : str, optional
        Dotted path of the offending configuration key, e.g. ``constants.eps``.
    """

    exit_code = 2

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class CFLError(ConfigError):
    pass


class ConductivityBoundsError(ConfigError):
    def __init__(self, message: str, xi: float, key: Optional[str] = "conductivity"):
        self.xi = xi
        super().__init__(f"{message} (at xi={xi!r})", key=key)


class NumericError(MaxHeatError):
    exit_code = 3

    def __init__(self, message: str, step: Optional[int] = None):
        self.step = step
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)


class CGConvergenceError(NumericError):
    def __init__(self, message: str, residuals: Sequence[float], step: Optional[int] = None):
        self.residuals: List[float] = list(residuals)
        super().__init__(f"{message}; last residuals {self.residuals[-5:]}", step=step)


class NonConvergenceError(MaxHeatError):
    """Plain Picard iteration did not reach the tolerance.

    ``deltas`` is the full sup-norm delta history, useful to tell a slow
    contraction from a cycle.
    """

    exit_code = 4

    def __init__(self, message: str, deltas: Sequence[float]):
        self.deltas: List[float] = list(deltas)
        super().__init__(message)


class AnnulusDomainError(MaxHeatError, ValueError):
    pass
