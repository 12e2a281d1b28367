"""Physical constants, the temperature dependent conductivity sigma(xi, x) and the source G."""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np
from loguru import logger

from .data_types import PhysicalConstants, ThetaField
from .domain import Domain
from .errors import ConductivityBoundsError, ConfigError, NumericError

__all__ = [
    "PhysicalConstants",
    "SpatialFactor",
    "ConductivityModel",
    "TemporalProfile",
    "SpatialProfile",
    "SourceG",
    "sigma_field",
    "validate_bounds",
    "load_tabulated_conductivity",
]

CONSTANT = "constant"
AFFINE_CLAMPED = "affine_clamped"
TABULATED = "tabulated"
CONDUCTIVITY_KINDS = (CONSTANT, AFFINE_CLAMPED, TABULATED)

DEFAULT_THETA_MAX = 100.0
BOUND_SAMPLES = 10_000
SLOPE_SLACK = 1e-6


@dataclass(frozen=True)
class SpatialFactor:
    """chi(x, y) in [0, 1] multiplying the temperature law.

    ``uniform`` is chi = 1; ``disc`` takes ``inside`` within the disc of
    ``radius`` around (cx, cy) and ``outside`` elsewhere (a lossy load
    embedded in a lossless medium).
    """

    kind: str = "uniform"
    cx: float = 0.5
    cy: float = 0.5
    radius: float = 0.25
    inside: float = 1.0
    outside: float = 0.0

    def __post_init__(self):
        if self.kind not in ("uniform", "disc"):
            raise ConfigError(f"unknown spatial factor {self.kind!r}", key="conductivity.spatial.kind")
        for name in ("inside", "outside"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"must lie in [0, 1], got {value}", key=f"conductivity.spatial.{name}")
        if self.kind == "disc" and not self.radius > 0:
            raise ConfigError("disc radius must be positive", key="conductivity.spatial.radius")

    def evaluate(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        if self.kind == "uniform":
            return np.ones(np.shape(X))
        inside = (X - self.cx) ** 2 + (Y - self.cy) ** 2 < self.radius ** 2
        return np.where(inside, self.inside, self.outside)


@dataclass(frozen=True)
class ConductivityModel:
    """sigma(xi, x) = chi(x) * law(xi) with declared bounds.

    ``sigma0`` bounds |sigma| and ``sigma1`` bounds |d sigma / d xi| on the
    operating range [-theta_max, theta_max]; both are checked by dense sampling
    when the model is built. Use the ``constant``, ``affine_clamped`` and
    ``tabulated`` constructors rather than the raw dataclass.
    """

    kind: str
    sigma0: float
    sigma1: float
    sigma_c: float = 0.0
    a: float = 0.0
    b: float = 0.0
    lo: float = -math.inf
    hi: float = math.inf
    xi_table: Tuple[float, ...] = ()
    sigma_table: Tuple[float, ...] = ()
    spatial: SpatialFactor = field(default_factory=SpatialFactor)
    theta_max: float = DEFAULT_THETA_MAX

    def __post_init__(self):
        if self.kind not in CONDUCTIVITY_KINDS:
            raise ConfigError(f"unknown conductivity kind {self.kind!r}, expected one of {CONDUCTIVITY_KINDS}",
                              key="conductivity.kind")
        if not (self.sigma0 >= 0 and self.sigma1 >= 0):
            raise ConfigError("declared bounds sigma0, sigma1 must be >= 0", key="conductivity")
        if self.kind == AFFINE_CLAMPED and not self.lo <= self.hi:
            raise ConfigError(f"clamp interval [{self.lo}, {self.hi}] is empty", key="conductivity.params")
        if self.kind == TABULATED:
            xi = np.asarray(self.xi_table, dtype=np.float64)
            if len(xi) < 2 or len(xi) != len(self.sigma_table):
                raise ConfigError("table needs >= 2 rows of (xi, sigma)", key="conductivity.table")
            if not np.all(np.diff(xi) > 0):
                raise ConfigError("table xi must be strictly increasing", key="conductivity.table")
        validate_bounds(self)

    @classmethod
    def constant(cls, sigma_c: float, sigma0: Optional[float] = None, sigma1: float = 0.0, **kwargs):
        return cls(CONSTANT, sigma0=abs(sigma_c) if sigma0 is None else sigma0, sigma1=sigma1,
                   sigma_c=sigma_c, **kwargs)

    @classmethod
    def affine_clamped(cls, a: float, b: float, lo: float, hi: float, sigma0: Optional[float] = None,
                       sigma1: Optional[float] = None, **kwargs):
        if sigma0 is None:
            sigma0 = max(abs(lo), abs(hi))
        if sigma1 is None:
            sigma1 = abs(b)
        return cls(AFFINE_CLAMPED, sigma0=sigma0, sigma1=sigma1, a=a, b=b, lo=lo, hi=hi, **kwargs)

    @classmethod
    def tabulated(cls, xi, sigma, sigma0: Optional[float] = None, sigma1: Optional[float] = None, **kwargs):
        xi = tuple(float(v) for v in xi)
        sigma = tuple(float(v) for v in sigma)
        if sigma0 is None:
            sigma0 = max(abs(v) for v in sigma)
        well_formed = len(xi) > 1 and len(xi) == len(sigma) and all(b > a for a, b in zip(xi, xi[1:]))
        if sigma1 is None and well_formed:
            sigma1 = float(np.max(np.abs(np.diff(sigma) / np.diff(xi))))
        return cls(TABULATED, sigma0=sigma0, sigma1=sigma1 or 0.0, xi_table=xi, sigma_table=sigma, **kwargs)

    @property
    def is_constant(self) -> bool:
        """True when sigma does not depend on the temperature."""
        return self.kind == CONSTANT

    def law(self, xi) -> np.ndarray:
        """Temperature part of sigma, without the spatial factor."""
        xi = np.asarray(xi, dtype=np.float64)
        if self.kind == CONSTANT:
            return np.full(xi.shape, self.sigma_c)
        if self.kind == AFFINE_CLAMPED:
            return np.clip(self.a + self.b * xi, self.lo, self.hi)
        return np.interp(xi, self.xi_table, self.sigma_table)

    def evaluate(self, xi, X, Y) -> np.ndarray:
        return self.spatial.evaluate(X, Y) * self.law(xi)


def validate_bounds(model: ConductivityModel, theta_max: Optional[float] = None,
                    strict: bool = True) -> Tuple[bool, bool]:
    """Check |sigma| <= sigma0 and |d sigma/d xi| <= sigma1 on [-theta_max, theta_max].

    Samples ``BOUND_SAMPLES`` points (plus the table knots for tabulated laws)
    and uses secant slopes between neighbours. The spatial factor lies in [0, 1]
    so bounds on the temperature law carry over to sigma(xi, x).

    Returns
    -------
    (sigma0_ok, sigma1_ok)
        Only returned in full when ``strict`` is False; in strict mode a
        violation raises :class:`ConductivityBoundsError` naming the offending xi.
    """
    theta_max = model.theta_max if theta_max is None else theta_max
    xi = np.linspace(-theta_max, theta_max, BOUND_SAMPLES)
    if model.kind == TABULATED:
        knots = np.asarray(model.xi_table)
        xi = np.union1d(xi, knots[np.abs(knots) <= theta_max])
    values = model.law(xi)
    slopes = np.abs(np.diff(values) / np.diff(xi))

    worst_value = int(np.argmax(np.abs(values)))
    sigma0_ok = bool(np.abs(values[worst_value]) <= model.sigma0)
    worst_slope = int(np.argmax(slopes)) if len(slopes) else 0
    sigma1_ok = bool(len(slopes) == 0 or slopes[worst_slope] <= model.sigma1 * (1 + SLOPE_SLACK))

    if strict:
        if not sigma0_ok:
            raise ConductivityBoundsError(
                f"|sigma| = {abs(values[worst_value]):.6g} exceeds sigma0 = {model.sigma0}", xi=float(xi[worst_value]))
        if not sigma1_ok:
            raise ConductivityBoundsError(
                f"slope {slopes[worst_slope]:.6g} exceeds sigma1 = {model.sigma1}", xi=float(xi[worst_slope]))
    return sigma0_ok, sigma1_ok


def lowest_sigma(model: ConductivityModel, theta_max: Optional[float] = None) -> float:
    """Lower bound of sigma(xi, x) over |xi| <= theta_max.

    The spatial factor lies in [0, 1], so the bound is min(0, min of the law).
    """
    theta_max = model.theta_max if theta_max is None else theta_max
    xi = np.linspace(-theta_max, theta_max, BOUND_SAMPLES)
    if model.kind == TABULATED:
        knots = np.asarray(model.xi_table)
        xi = np.union1d(xi, knots[np.abs(knots) <= theta_max])
    return min(0.0, float(np.min(model.law(xi))))


def sigma_field(model: ConductivityModel, theta, dom: Domain) -> np.ndarray:
    """Nodal conductivity sigma(theta(i, j), x_ij); zero off the interior."""
    if isinstance(theta, ThetaField):
        theta = theta.theta
    if not np.isfinite(theta).all():
        raise NumericError("non-finite temperature passed to the conductivity law")
    X, Y = dom.coordinates()
    return np.where(dom.interior, model.evaluate(theta, X, Y), 0.0)


def load_tabulated_conductivity(path, sigma0: Optional[float] = None, sigma1: Optional[float] = None,
                                **kwargs) -> ConductivityModel:
    """Read a two-column CSV (xi, sigma). A non-numeric first line is treated as header."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"conductivity table {path} does not exist", key="conductivity.params.path")
    try:
        table = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except ValueError:
        table = np.loadtxt(path, delimiter=",", comments="#", ndmin=2, skiprows=1)
    if table.shape[1] != 2:
        raise ConfigError(f"{path}: expected 2 columns, found {table.shape[1]}", key="conductivity.params.path")
    logger.debug(f"Loaded {len(table)} conductivity rows from {path}")
    return ConductivityModel.tabulated(table[:, 0], table[:, 1], sigma0=sigma0, sigma1=sigma1, **kwargs)


@dataclass(frozen=True)
class TemporalProfile:
    """f(t) of a separable source: ``constant``, ``sine`` or ``gaussian_pulse``."""

    kind: str = "constant"
    amplitude: float = 1.0
    omega: float = 1.0
    phase: float = 0.0
    t0: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "sine", "gaussian_pulse"):
            raise ConfigError(f"unknown temporal profile {self.kind!r}", key="source.params.temporal.kind")
        if self.kind == "gaussian_pulse" and not self.width > 0:
            raise ConfigError("pulse width must be positive", key="source.params.temporal.width")

    def __call__(self, t: float) -> float:
        if self.kind == "constant":
            return self.amplitude
        if self.kind == "sine":
            return self.amplitude * math.sin(self.omega * t + self.phase)
        return self.amplitude * math.exp(-(((t - self.t0) / self.width) ** 2))


@dataclass(frozen=True)
class SpatialProfile:
    """g(x, y) of a separable source: ``uniform``, ``gaussian`` or ``mode``."""

    kind: str = "gaussian"
    x0: float = 0.5
    y0: float = 0.5
    width: float = 0.1

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian", "mode"):
            raise ConfigError(f"unknown spatial profile {self.kind!r}", key="source.params.spatial.kind")

    def evaluate(self, dom: Domain) -> np.ndarray:
        X, Y = dom.coordinates()
        if self.kind == "uniform":
            return np.ones(dom.node_shape)
        if self.kind == "gaussian":
            return np.exp(-((X - self.x0) ** 2 + (Y - self.y0) ** 2) / self.width ** 2)
        x0, y0 = dom.x[0], dom.y[0]
        return np.sin(np.pi * (X - x0) / dom.width) * np.sin(np.pi * (Y - y0) / dom.height)


@dataclass(frozen=True)
class SourceG:
    """Out-of-plane charge generation term G_z(x, y, t)."""

    kind: str = "zero"
    temporal: TemporalProfile = field(default_factory=TemporalProfile)
    spatial: SpatialProfile = field(default_factory=SpatialProfile)

    def __post_init__(self):
        if self.kind not in ("zero", "separable"):
            raise ConfigError(f"unknown source kind {self.kind!r}", key="source.kind")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def sampler(self, dom: Domain) -> Callable[[float], Optional[np.ndarray]]:
        """Return t -> masked nodal field, or t -> None for the zero source."""
        if self.is_zero:
            return lambda t: None
        shape = dom.apply_field_mask(self.spatial.evaluate(dom))
        temporal = self.temporal
        return lambda t: temporal(t) * shape

    def sample(self, t: float, dom: Domain) -> np.ndarray:
        value = self.sampler(dom)(t)
        return dom.zeros() if value is None else value
