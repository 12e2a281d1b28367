"""Basic data types shared by the solvers."""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class PhysicalConstants:
    """Dielectric constant, magnetic permeability and thermal diffusivity."""

    eps: float = 1.0
    mu: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        for name in ("eps", "mu", "kappa"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"must be finite and > 0, got {value!r}", key=f"constants.{name}")

    @property
    def wave_speed(self) -> float:
        return 1.0 / math.sqrt(self.eps * self.mu)


@dataclass
class FieldState:
    """Electromagnetic unknowns on the staggered grid.

    ``Dz`` lives on nodes at time ``t``; ``Bx`` (x-faces, shape (nx+1, ny)) and
    ``By`` (y-faces, shape (nx, ny+1)) hold the magnetic induction half a step
    behind, at ``t - dt/2``.
    """

    Dz: np.ndarray
    Bx: np.ndarray
    By: np.ndarray
    t: float = 0.0
    step: int = 0

    def copy(self) -> "FieldState":
        return replace(self, Dz=self.Dz.copy(), Bx=self.Bx.copy(), By=self.By.copy())

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.Dz).all() and np.isfinite(self.Bx).all() and np.isfinite(self.By).all())


@dataclass
class ThetaField:
    theta: np.ndarray
    t: float = 0.0
    step: int = 0
    cg_iterations: int = 0


@dataclass
class EnergyTrajectory:
    """E(t_n) on the uniform time grid t_n = n*dt, n = 0..N_t.

    ``bound_N`` is the radius of the sup-norm ball K the trajectory is expected
    to live in (``None`` when no bound has been computed).
    """

    samples: np.ndarray
    dt: float
    bound_N: Optional[float] = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)

    def __len__(self):
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.samples))

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.samples))) if len(self.samples) else 0.0

    def in_K(self) -> bool:
        return self.bound_N is None or self.sup <= self.bound_N

    def sup_distance(self, other: "EnergyTrajectory") -> float:
        if len(other) != len(self):
            raise ValueError(f"trajectory lengths differ: {len(self)} vs {len(other)}")
        return float(np.max(np.abs(self.samples - other.samples))) if len(self) else 0.0

    @classmethod
    def constant(cls, value: float, n_steps: int, dt: float, bound_N: Optional[float] = None):
        return cls(np.full(n_steps + 1, float(value)), dt, bound_N)


@dataclass
class ThetaHistory:
    """Temperature time levels kept every ``stride`` steps.

    ``at(n)`` returns level n exactly when it was stored and a linear
    interpolation in time between the neighbouring stored levels otherwise.
    The final level is always stored.
    """

    dt: float
    n_steps: int
    stride: int = 1
    levels: Dict[int, np.ndarray] = field(default_factory=dict)
    cg_iterations: List[int] = field(default_factory=list)

    def keeps(self, n: int) -> bool:
        return n % self.stride == 0 or n == self.n_steps

    def store(self, n: int, theta: np.ndarray):
        if self.keeps(n):
            self.levels[n] = theta

    def at(self, n: int) -> np.ndarray:
        if n in self.levels:
            return self.levels[n]
        lo = (n // self.stride) * self.stride
        hi = min(lo + self.stride, self.n_steps)
        w = (n - lo) / (hi - lo)
        return (1.0 - w) * self.levels[lo] + w * self.levels[hi]

    def field(self, n: int) -> ThetaField:
        return ThetaField(self.at(n), t=n * self.dt, step=n)

    @property
    def final(self) -> ThetaField:
        return self.field(self.n_steps)


@dataclass(frozen=True)
class GronwallBound:
    """A-priori bound on F(t) = (1/eps)|D|^2 + (1/mu)|B|^2 = 2E(t) over [0, T].

    ``N`` bounds F and therefore E; ``envelope(t)`` is the time-resolved bound.
    """

    N: float
    C1: float
    C2: float
    F0: float
    T: float

    def envelope(self, t):
        t = np.asarray(t, dtype=np.float64)
        return (self.F0 + self.C1 * t) * np.exp(self.C2 * t)


@dataclass
class PicardReport:
    iterates: List[EnergyTrajectory] = field(default_factory=list)
    deltas: List[float] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        """Number of applications of the operator T."""
        return len(self.deltas)

    @property
    def contraction_ratios(self) -> List[float]:
        ratios = []
        for prev, cur in zip(self.deltas[:-1], self.deltas[1:]):
            ratios.append(cur / prev if prev > 0 else 0.0)
        return ratios
