"""Reference solutions used as ground truth by the tests and the ``verify`` command.

Nothing here calls into the time-stepping solvers; every oracle has its own
discretization (radial finite differences, a sine-transform Poisson solve or a
closed-form series).
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np
import scipy.fft
import scipy.linalg

from .domain import ANNULUS_R_INNER, ANNULUS_R_OUTER
from .errors import AnnulusDomainError, ConfigError

MIN_RADIAL_POINTS = 100


def annulus_energy(mu: float = 1.0) -> float:
    """Energy of the static annulus field: 1/2 int |B0|^2 / mu = pi log 2 / (2 mu)."""
    return math.pi * math.log(2.0) / (2.0 * mu)


def annulus_b0(x, y, tol: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """B0 = (y, -x) / (x^2 + y^2), the curl-free circulating field of the annulus.

    Raises :class:`AnnulusDomainError` for points outside the closed annulus
    widened by ``tol`` in radius.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    r = np.hypot(x, y)
    outside = (r < ANNULUS_R_INNER - tol) | (r > ANNULUS_R_OUTER + tol)
    if np.any(outside):
        bad = np.argwhere(np.atleast_1d(outside))[0]
        raise AnnulusDomainError(f"point with r={np.atleast_1d(r)[tuple(bad)]:.6g} lies outside the annulus")
    r2 = r * r
    return y / r2, -x / r2


def annulus_b0_curl(x, y, step: float = 1e-5) -> np.ndarray:
    """dBy/dx - dBx/dy of annulus_b0 by central differences."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _, by_right = annulus_b0(x + step, y, tol=2 * step)
    _, by_left = annulus_b0(x - step, y, tol=2 * step)
    bx_up, _ = annulus_b0(x, y + step, tol=2 * step)
    bx_down, _ = annulus_b0(x, y - step, tol=2 * step)
    return (by_right - by_left) / (2 * step) - (bx_up - bx_down) / (2 * step)


@dataclass
class RadialSteadyState:
    """Steady temperature of the annulus under the constant source E_const.

    Solves kappa (1/r)(r theta')' = -E_const, theta(1) = theta(sqrt 2) = 0.
    ``residual`` is the largest discrete equation residual, relative to the
    magnitude of the terms in its row.
    """

    r: np.ndarray
    theta_of_r: np.ndarray
    E_const: float
    kappa: float
    mu: float
    residual: float

    @property
    def coefficients(self) -> Tuple[float, float]:
        """(a, b) of the closed form a (r^2 - 1) + b log r."""
        a = -self.E_const / (4.0 * self.kappa)
        b = -2.0 * a / math.log(ANNULUS_R_OUTER ** 2)
        return a, b

    def closed_form(self, r) -> np.ndarray:
        a, b = self.coefficients
        r = np.asarray(r, dtype=np.float64)
        return a * (r * r - 1.0) + b * np.log(r)

    def at(self, r) -> np.ndarray:
        """Profile at arbitrary radii by linear interpolation (clamped to [1, sqrt 2])."""
        return np.interp(r, self.r, self.theta_of_r)

    @property
    def r_at_max(self) -> float:
        a, b = self.coefficients
        return math.sqrt(-b / (2.0 * a))

    @property
    def theta_max(self) -> float:
        return float(self.closed_form(self.r_at_max))

    def max_closed_form_deviation(self) -> float:
        return float(np.max(np.abs(self.theta_of_r - self.closed_form(self.r))))

    def to_csv(self, path) -> Path:
        path = Path(path)
        np.savetxt(path, np.column_stack([self.r, self.theta_of_r]), fmt="%.17g", delimiter=",",
                   header="r,theta", comments="")
        return path


def radial_steady_theta(kappa: float = 1.0, mu: float = 1.0, n_r: int = 2001) -> RadialSteadyState:
    """Second-order finite differences in r with a direct tridiagonal solve."""
    if n_r < MIN_RADIAL_POINTS:
        raise ConfigError(f"need at least {MIN_RADIAL_POINTS} radial points, got {n_r}", key="n_r")
    E_const = annulus_energy(mu)
    r = np.linspace(ANNULUS_R_INNER, ANNULUS_R_OUTER, n_r)
    dr = r[1] - r[0]
    ri = r[1:-1]
    r_minus = ri - 0.5 * dr
    r_plus = ri + 0.5 * dr
    scale = kappa / (ri * dr * dr)
    lower = scale * r_minus
    diag = -scale * (r_minus + r_plus)
    upper = scale * r_plus

    m = n_r - 2
    ab = np.zeros((3, m))
    ab[0, 1:] = upper[:-1]
    ab[1, :] = diag
    ab[2, :-1] = lower[1:]
    rhs = np.full(m, -E_const)
    inner = scipy.linalg.solve_banded((1, 1), ab, rhs)

    theta = np.zeros(n_r)
    theta[1:-1] = inner
    terms = (lower * theta[:-2], diag * theta[1:-1], upper * theta[2:])
    scale = np.abs(terms[0]) + np.abs(terms[1]) + np.abs(terms[2]) + E_const
    residual = float(np.max(np.abs(terms[0] + terms[1] + terms[2] + E_const) / scale))
    return RadialSteadyState(r=r, theta_of_r=theta, E_const=E_const, kappa=kappa, mu=mu, residual=residual)


def printed_annulus_theta(r, kappa: float = 1.0, mu: float = 1.0) -> np.ndarray:
    """The steady temperature as printed in the literature for the annulus example.

    pi log r / (2 kappa log 2) - pi r / (2 kappa mu) + pi / (2 kappa mu). It is
    kept only to document that it does not solve the steady problem.
    """
    r = np.asarray(r, dtype=np.float64)
    c = math.pi / (2.0 * kappa)
    return c * np.log(r) / math.log(2.0) - c * r / mu + c / mu


def printed_annulus_residual(r, kappa: float = 1.0, mu: float = 1.0, step: float = 1e-4) -> np.ndarray:
    """kappa Lap(theta) + E_const for the printed profile, by radial central differences."""
    r = np.asarray(r, dtype=np.float64)
    f = printed_annulus_theta(r, kappa, mu)
    fp = printed_annulus_theta(r + step, kappa, mu)
    fm = printed_annulus_theta(r - step, kappa, mu)
    lap = (fp - 2 * f + fm) / step ** 2 + (fp - fm) / (2 * step * r)
    return kappa * lap + annulus_energy(mu)


def square_torsion_field(n: int) -> np.ndarray:
    """Five-point solution of -Lap u = 1 on the unit square, u = 0 on the boundary.

    Solved exactly with the type-I sine transform, which diagonalizes the
    Dirichlet five-point Laplacian. Returns the full (n+1, n+1) nodal array.
    """
    if n < 2:
        raise ConfigError(f"need n >= 2, got {n}", key="n")
    h = 1.0 / n
    k = np.arange(1, n)
    s = np.sin(k * np.pi / (2 * n)) ** 2
    eig = (4.0 / h ** 2) * (s[:, None] + s[None, :])
    rhs = np.ones((n - 1, n - 1))
    u_hat = scipy.fft.dstn(rhs, type=1) / eig
    u = np.zeros((n + 1, n + 1))
    u[1:-1, 1:-1] = scipy.fft.idstn(u_hat, type=1)
    return u


def square_torsion_center(n: int = 512) -> float:
    if n % 2:
        raise ConfigError(f"n must be even to have a centre node, got {n}", key="n")
    return float(square_torsion_field(n)[n // 2, n // 2])


def torsion_series_center(terms: int = 200) -> float:
    """Classical double sine series for u(1/2, 1/2), summed over odd j, k < 2*terms."""
    j = 2 * np.arange(terms) + 1
    J, K = np.meshgrid(j, j, indexing="ij")
    signs = (-1.0) ** ((J - 1) // 2 + (K - 1) // 2)
    coeff = 16.0 / (math.pi ** 4 * J * K * (J * J + K * K))
    return float(np.sum(signs * coeff))
