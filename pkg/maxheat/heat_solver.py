"""Backward Euler solver for theta_t = kappa * Lap(theta) + f(t), theta = 0 on the boundary.

The source f(t) is a spatial constant (the nonlocal coupling feeds the total
electromagnetic energy). Each step solves

    (I - kappa dt L_h) theta^{n+1} = theta^n + dt f_n 1_interior

with matrix-free conjugate gradients. L_h is the five-point Laplacian on the
interior nodes. Next to a curved boundary the missing neighbour is replaced by
the zero Dirichlet value at the true crossing distance d <= h, which changes
only the diagonal and keeps the operator symmetric:

    L_h theta_i = sum_dir [ theta_nb / h^2  -  theta_i / (h d_dir) ]
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
import tqdm
from loguru import logger

from .data_types import EnergyTrajectory, ThetaField, ThetaHistory
from .domain import Domain
from .errors import CGConvergenceError, ConfigError, NumericError
from .parallel import SERIAL, GridPool

DEFAULT_CG_TOL = 1e-10
STEADY_TOL = 1e-12


@dataclass(frozen=True)
class HeatStepParams:
    dt: float
    cg_tol: float = DEFAULT_CG_TOL
    cg_max_iter: Optional[int] = None

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"heat time step must be positive, got {self.dt!r}", key="time.dt")
        if not 0 < self.cg_tol <= 1e-6:
            raise ConfigError(f"cg_tol must lie in (0, 1e-6], got {self.cg_tol}", key="heat.cg_tol")
        if self.cg_max_iter is not None and self.cg_max_iter < 1:
            raise ConfigError("cg_max_iter must be positive", key="heat.cg_max_iter")

    def max_iter(self, dom: Domain) -> int:
        return self.cg_max_iter if self.cg_max_iter is not None else 10 * max(dom.nx, dom.ny)


@lru_cache(maxsize=16)
def laplacian_diagonal(dom: Domain) -> np.ndarray:
    """sum_dir 1 / (h d_dir) on interior nodes, zero elsewhere."""
    diag = np.sum(1.0 / (dom.h * np.asarray(dom.arms)), axis=0)
    return np.where(dom.interior, diag, 0.0)


def apply_laplacian(theta: np.ndarray, dom: Domain, pool: GridPool = SERIAL) -> np.ndarray:
    """L_h applied to a field that vanishes off the interior."""
    h2 = dom.h * dom.h
    diag = laplacian_diagonal(dom)
    interior = dom.interior
    out = np.zeros(dom.node_shape)
    nx = dom.nx

    def kernel(rows):
        lo, hi = max(rows.start, 1), min(rows.stop, nx)
        if hi <= lo:
            return
        nb = theta[lo + 1:hi + 1, 1:-1] + theta[lo - 1:hi - 1, 1:-1] + theta[lo:hi, 2:] + theta[lo:hi, :-2]
        value = nb / h2 - diag[lo:hi, 1:-1] * theta[lo:hi, 1:-1]
        out[lo:hi, 1:-1] = np.where(interior[lo:hi, 1:-1], value, 0.0)

    pool.run(kernel, nx + 1)
    return out


def conjugate_gradient(apply_A: Callable[[np.ndarray], np.ndarray], b: np.ndarray, x0: np.ndarray,
                       tol: float, max_iter: int, pool: GridPool = SERIAL) -> Tuple[np.ndarray, List[float]]:
    """Unpreconditioned CG for a symmetric positive definite operator.

    Stops when ||r|| <= tol * ||b||. Returns the solution and the relative
    residual history; the first entry belongs to ``x0``. All dot products go
    through ``pool.total`` so the iterates do not depend on the thread count.
    """
    def dot(u, v):
        return pool.total(u * v)

    b_norm = math.sqrt(dot(b, b))
    if b_norm == 0.0:
        return np.zeros_like(b), [0.0]
    x = np.array(x0, dtype=np.float64)
    r = b - apply_A(x)
    rr = dot(r, r)
    residuals = [math.sqrt(rr) / b_norm]
    if residuals[-1] <= tol:
        return x, residuals
    p = r.copy()
    for _ in range(max_iter):
        Ap = apply_A(p)
        pAp = dot(p, Ap)
        if pAp <= 0:
            raise CGConvergenceError("operator is not positive definite", residuals)
        alpha = rr / pAp
        x += alpha * p
        r -= alpha * Ap
        rr_new = dot(r, r)
        residuals.append(math.sqrt(rr_new) / b_norm)
        if residuals[-1] <= tol:
            return x, residuals
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise CGConvergenceError(f"CG did not reach tol={tol:g} in {max_iter} iterations", residuals)


def _as_array(theta: Union[ThetaField, np.ndarray]) -> np.ndarray:
    return theta.theta if isinstance(theta, ThetaField) else np.asarray(theta, dtype=np.float64)


def heat_step(theta: Union[ThetaField, np.ndarray], f_n: float, params: HeatStepParams, kappa: float,
              dom: Domain, pool: GridPool = SERIAL) -> ThetaField:
    """One backward Euler step with the spatially constant source ``f_n``."""
    prev = theta if isinstance(theta, ThetaField) else ThetaField(_as_array(theta))
    th = prev.theta
    if not dom.is_boundary_clean(th):
        raise NumericError("theta is not zero on the boundary", step=prev.step)
    dt = params.dt
    c = kappa * dt

    def apply_A(u):
        return u - c * apply_laplacian(u, dom, pool)

    b = th + dt * f_n * dom.interior
    try:
        x, residuals = conjugate_gradient(apply_A, b, th, params.cg_tol, params.max_iter(dom), pool)
    except CGConvergenceError as exc:
        raise CGConvergenceError("heat step CG failed", exc.residuals, step=prev.step) from exc
    iterations = len(residuals) - 1
    if iterations > 0.8 * params.max_iter(dom):
        logger.warning(f"Heat step {prev.step}: CG needed {iterations} of {params.max_iter(dom)} iterations")
    x = dom.apply_mask(x)
    if not np.isfinite(x).all():
        raise NumericError("non-finite temperature", step=prev.step)
    return ThetaField(x, t=prev.t + dt, step=prev.step + 1, cg_iterations=iterations)


def solve_heat_trajectory(theta0: np.ndarray, E: EnergyTrajectory, params: HeatStepParams, kappa: float,
                          dom: Domain, pool: GridPool = SERIAL, stride: int = 1,
                          progress: bool = False) -> ThetaHistory:
    """theta^{n+1} = heat_step(theta^n, E(t_n)) for n = 0 .. len(E) - 2.

    Levels 0 .. len(E) - 1 are produced; every ``stride``-th one (and the last)
    is kept in the returned history.
    """
    n_steps = len(E) - 1
    history = ThetaHistory(dt=params.dt, n_steps=n_steps, stride=stride)
    current = ThetaField(np.array(theta0, dtype=np.float64))
    history.store(0, current.theta)
    steps = range(n_steps)
    if progress:
        steps = tqdm.tqdm(steps, desc="Heat steps", total=n_steps)
    for n in steps:
        current = heat_step(current, float(E.samples[n]), params, kappa, dom, pool)
        history.store(n + 1, current.theta)
        history.cg_iterations.append(current.cg_iterations)
    if history.cg_iterations:
        logger.debug(f"Heat trajectory: {n_steps} steps, mean CG iterations "
                     f"{np.mean(history.cg_iterations):.1f}, max {max(history.cg_iterations)}")
    return history


def heat_steady_state(f: float, kappa: float, dom: Domain, tol: float = DEFAULT_CG_TOL,
                      max_iter: Optional[int] = None, pool: GridPool = SERIAL) -> np.ndarray:
    """Solve the discrete Poisson problem kappa L_h theta = -f directly."""
    if max_iter is None:
        max_iter = 20 * max(dom.nx, dom.ny)

    def apply_A(u):
        return -kappa * apply_laplacian(u, dom, pool)

    b = f * dom.interior.astype(np.float64)
    x, residuals = conjugate_gradient(apply_A, b, dom.zeros(), tol, max_iter, pool)
    logger.debug(f"Steady heat solve: {len(residuals) - 1} CG iterations")
    return dom.apply_mask(x)


def run_to_steady(theta0: np.ndarray, f: float, params: HeatStepParams, kappa: float, dom: Domain,
                  tol: float = STEADY_TOL, max_steps: int = 100_000, pool: GridPool = SERIAL) -> ThetaField:
    """March heat_step with constant f until ||theta^{n+1} - theta^n||_inf < tol."""
    current = ThetaField(np.array(theta0, dtype=np.float64))
    for _ in range(max_steps):
        nxt = heat_step(current, f, params, kappa, dom, pool)
        change = float(np.max(np.abs(nxt.theta - current.theta)))
        current = nxt
        if change < tol:
            logger.debug(f"Steady state after {current.step} steps")
            return current
    raise NumericError(f"no steady state within {max_steps} steps", step=current.step)


def discrete_h1_seminorm(theta: np.ndarray, dom: Domain, pool: GridPool = SERIAL) -> float:
    """sqrt(sum over grid edges of (difference / h)^2 * h^2)."""
    theta = _as_array(theta)
    gx = np.diff(theta, axis=0)
    gy = np.diff(theta, axis=1)
    return math.sqrt(pool.total(gx * gx) + pool.total(gy * gy))
