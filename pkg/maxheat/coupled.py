"""The nonlinear Maxwell-heat problem with the nonlocal source E(t).

Two drivers produce the same discrete solution:

* ``run_monolithic`` advances fields and temperature together, one step at a time;
* ``picard_run`` iterates the operator T on whole energy trajectories
  (heat solve with a given E, conductivity from the resulting temperature,
  linear Maxwell solve, energy of the new fields) until E is a fixed point.

Both use the same indexing: the step n -> n+1 uses E^n for the heat step and
s^n = sigma(theta^{n+1}) for the field step.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import tqdm
from loguru import logger

from .data_types import (EnergyTrajectory, FieldState, GronwallBound, PhysicalConstants, PicardReport,
                         ThetaField, ThetaHistory)
from .domain import Domain, integrate_nodal
from .errors import ConfigError, NonConvergenceError
from .heat_solver import DEFAULT_CG_TOL, HeatStepParams, heat_step, solve_heat_trajectory
from .materials import ConductivityModel, SourceG, lowest_sigma, sigma_field, validate_bounds
from .maxwell_solver import (DEFAULT_CFL_SAFETY, EnergyLedger, LinearRun, MaxwellStepParams, StepDiagnostics,
                             advance_b, as_sampler, check_cfl, gronwall_envelope, initial_state, maxwell_step,
                             n_steps_for, run_linear)
from .parallel import GridPool
from .state import FaceField, field_energy

MONOLITHIC = "monolithic"
PICARD = "picard"
MODES = (MONOLITHIC, PICARD)

OPERATING_RANGE_FACTOR = 10.0


@dataclass
class CoupledConfig:
    """Everything a coupled run needs, already turned into runtime objects."""

    dom: Domain
    consts: PhysicalConstants
    model: ConductivityModel
    G: SourceG
    D0: np.ndarray
    B0: FaceField
    theta0: np.ndarray
    T_final: float
    dt: float
    mode: str = MONOLITHIC
    picard_tol: float = 1e-8
    picard_max_iter: int = 100
    cfl_safety: float = DEFAULT_CFL_SAFETY
    cg_tol: float = DEFAULT_CG_TOL
    cg_max_iter: Optional[int] = None
    snapshot_stride: Optional[int] = None
    theta_stride: int = 1
    threads: int = 1
    progress: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}, expected one of {MODES}", key="solver.mode")
        if not self.picard_tol > 0:
            raise ConfigError("picard_tol must be positive", key="solver.picard_tol")
        if self.picard_max_iter < 1:
            raise ConfigError("picard_max_iter must be >= 1", key="solver.picard_max_iter")
        if self.theta_stride < 1:
            raise ConfigError("theta_stride must be >= 1", key="output.theta_stride")

    @property
    def n_steps(self) -> int:
        return n_steps_for(self.T_final, self.dt)

    @property
    def maxwell_params(self) -> MaxwellStepParams:
        return MaxwellStepParams(dt=self.dt, cfl_safety=self.cfl_safety)

    @property
    def heat_params(self) -> HeatStepParams:
        return HeatStepParams(dt=self.dt, cg_tol=self.cg_tol, cg_max_iter=self.cg_max_iter)

    def pool(self) -> GridPool:
        return GridPool(self.threads)


@dataclass
class CoupledResult:
    states: List[FieldState]
    theta: List[ThetaField]
    energy: EnergyTrajectory
    diagnostics: List[StepDiagnostics]
    gronwall: GronwallBound
    picard: Optional[PicardReport] = None

    @property
    def final_state(self) -> FieldState:
        return self.states[-1]

    @property
    def final_theta(self) -> ThetaField:
        return self.theta[-1]


def initial_energy(cfg: CoupledConfig, pool: Optional[GridPool] = None) -> float:
    """E(0) of the unstaggered initial data."""
    pool = pool or GridPool(1)
    return field_energy(cfg.D0, cfg.B0[0], cfg.B0[1], cfg.dom, cfg.consts.eps, cfg.consts.mu, pool)


def gronwall_bound(cfg: CoupledConfig, pool: Optional[GridPool] = None) -> GronwallBound:
    """A-priori bound for F = 2E = (1/eps)|D|^2 + (1/mu)|B|^2.

    From the energy balance F' = -(2/eps^2)(sD, D) + (2/eps)(G, D), with
    |s| <= sigma0 and |D|^2 <= eps F:

        -(2/eps^2)(sD, D) <= (2 sigma0 / eps) F
        (2/eps)(G, D) <= |G|^2 + |D|^2 / eps^2 <= |G|^2 + F / eps

    hence F' <= C1 + C2 F with C1 = sup_t |G(t)|^2 and C2 = (2 sigma0 + 1) / eps.
    Without a source the second line drops out and C2 = 2 sigma0 / eps. Then
    F(t) <= (F(0) + C1 t) exp(C2 t) and N = (F(0) + C1 T) exp(C2 T).
    """
    pool = pool or GridPool(1)
    dom = cfg.dom
    F0 = 2.0 * initial_energy(cfg, pool)
    C1 = 0.0
    if not cfg.G.is_zero:
        sampler = cfg.G.sampler(dom)
        n_steps = cfg.n_steps
        for t in np.linspace(0.0, n_steps * cfg.dt, 2 * n_steps + 1):
            g = sampler(float(t))
            C1 = max(C1, integrate_nodal(g * g, dom, pool))
    young = 1.0 if C1 > 0.0 else 0.0
    C2 = (2.0 * cfg.model.sigma0 + young) / cfg.consts.eps
    T = cfg.n_steps * cfg.dt
    N = float(gronwall_envelope(F0, C1, C2, T))
    if not math.isfinite(N):
        raise ConfigError(f"a-priori energy bound overflows (C2 T = {C2 * T:.3g})", key="time.T_final")
    return GronwallBound(N=N, C1=C1, C2=C2, F0=F0, T=T)


def theta_bound(cfg: CoupledConfig, bound: GronwallBound) -> float:
    """Maximum principle: |theta| <= |theta0|_inf + N T."""
    return float(np.max(np.abs(cfg.theta0))) + bound.N * bound.T


def prepare_coupled(cfg: CoupledConfig, pool: Optional[GridPool] = None) -> GronwallBound:
    """Check CFL, initial data and conductivity bounds; return the a-priori bound."""
    dom = cfg.dom
    check_cfl(cfg.maxwell_params, dom, cfg.consts)
    if not dom.is_field_clean(cfg.D0):
        raise ConfigError("initial Dz must vanish outside the conductor", key="initial.dz")
    if not dom.is_boundary_clean(cfg.theta0):
        raise ConfigError("initial theta must vanish off the interior", key="initial.theta")
    if cfg.B0[0].shape != dom.bx_shape or cfg.B0[1].shape != dom.by_shape:
        raise ConfigError(f"B0 shapes {cfg.B0[0].shape}, {cfg.B0[1].shape} do not match the grid", key="initial.b")
    bound = gronwall_bound(cfg, pool)
    operating = OPERATING_RANGE_FACTOR * theta_bound(cfg, bound)
    if not cfg.model.is_constant:
        validate_bounds(cfg.model, theta_max=max(operating, 1.0))
    # the damped update divides by 1 + s dt / (2 eps)
    alpha = lowest_sigma(cfg.model, max(operating, 1.0)) * 0.5 * cfg.dt / cfg.consts.eps
    if alpha <= -1.0:
        raise ConfigError(f"negative conductivity too strong for dt={cfg.dt:.6g}: s dt / (2 eps) = {alpha:.3g} <= -1",
                          key="conductivity")
    logger.info(f"Prepared {cfg.mode} run on {dom}: {cfg.n_steps} steps of dt={cfg.dt:.6g}, "
                f"Gronwall N={bound.N:.6g}, theta range +-{operating:.6g}")
    return bound


def run_monolithic(cfg: CoupledConfig, pool: Optional[GridPool] = None) -> CoupledResult:
    """Per step: E^n, then theta^{n+1} = heat_step(theta^n, E^n), then s^n = sigma(theta^{n+1}),
    then the field update with s^n."""
    own_pool = pool is None
    pool = pool or cfg.pool()
    try:
        bound = prepare_coupled(cfg, pool)
        dom, consts, dt = cfg.dom, cfg.consts, cfg.dt
        mparams, hparams = cfg.maxwell_params, cfg.heat_params
        n_steps = cfg.n_steps
        G_at = as_sampler(cfg.G, dom)

        state = initial_state(cfg.D0, cfg.B0, dom, mparams, consts, pool)
        theta = ThetaField(np.array(cfg.theta0, dtype=np.float64))
        states, thetas = [state], [theta]
        ledger = EnergyLedger(dom, consts, dt, pool)

        steps = range(n_steps)
        if cfg.progress:
            steps = tqdm.tqdm(steps, desc="Coupled steps", total=n_steps)
        for n in steps:
            B_next = advance_b(state, dom, dt, consts.eps, pool)
            E_n = ledger.level(n, state.Dz, (state.Bx, state.By), B_next)
            theta = heat_step(theta, E_n, hparams, consts.kappa, dom, pool)
            s = sigma_field(cfg.model, theta.theta, dom)
            new = maxwell_step(state, s, G_at, mparams, consts, dom, pool, B_next=B_next)
            ledger.interval(s, state.Dz, new.Dz, G_at(state.t + 0.5 * dt))
            state = new
            if state.step != n_steps:
                if cfg.snapshot_stride and state.step % cfg.snapshot_stride == 0:
                    states.append(state)
                if state.step % cfg.theta_stride == 0:
                    thetas.append(theta)
            logger.debug(f"step {n}: E={E_n:.12g}, CG iterations {theta.cg_iterations}")

        ledger.level(n_steps, state.Dz, (state.Bx, state.By), advance_b(state, dom, dt, consts.eps, pool))
        if n_steps > 0:
            states.append(state)
            thetas.append(theta)
        energy = ledger.trajectory(bound.N)
        if not energy.in_K():
            logger.warning(f"max E = {energy.sup:.6g} exceeds the a-priori bound N = {bound.N:.6g}")
        logger.info(f"Monolithic run done: E(0)={energy.samples[0]:.6g}, E(T)={energy.samples[-1]:.6g}, "
                    f"max residual {ledger.max_residual:.3e}")
        return CoupledResult(states=states, theta=thetas, energy=energy, diagnostics=ledger.rows, gronwall=bound)
    finally:
        if own_pool:
            pool.close()


def _apply_T(E_in: EnergyTrajectory, cfg: CoupledConfig, pool: GridPool,
             progress: bool = False) -> Tuple[EnergyTrajectory, ThetaHistory, LinearRun]:
    if len(E_in) != cfg.n_steps + 1:
        raise ValueError(f"E has {len(E_in)} samples, the time grid has {cfg.n_steps + 1}")
    if not E_in.in_K():
        logger.warning(f"T applied outside K: sup E = {E_in.sup:.6g} > N = {E_in.bound_N:.6g}")
    dom, consts = cfg.dom, cfg.consts
    history = solve_heat_trajectory(cfg.theta0, E_in, cfg.heat_params, consts.kappa, dom, pool,
                                    stride=cfg.theta_stride, progress=progress)

    def s_of(n):
        return sigma_field(cfg.model, history.at(n + 1), dom)

    run = run_linear(cfg.D0, cfg.B0, s_of, cfg.G, cfg.T_final, cfg.maxwell_params, consts, dom, pool,
                     snapshot_stride=cfg.snapshot_stride, progress=progress)
    energy = EnergyTrajectory(run.energy.samples, run.energy.dt, E_in.bound_N)
    return energy, history, run


def picard_T(E_in: EnergyTrajectory, cfg: CoupledConfig, pool: Optional[GridPool] = None) -> EnergyTrajectory:
    """E_hat = T(E_in): heat with E_in, conductivity from the heated theta, linear Maxwell, energy."""
    own_pool = pool is None
    pool = pool or cfg.pool()
    try:
        return _apply_T(E_in, cfg, pool)[0]
    finally:
        if own_pool:
            pool.close()


def _theta_fields(history: ThetaHistory) -> List[ThetaField]:
    return [history.field(n) for n in sorted(history.levels)]


def picard_run(cfg: CoupledConfig, pool: Optional[GridPool] = None) -> CoupledResult:
    """Iterate E^{k+1} = T(E^k) from E^0 = E(0) until the sup-norm change is below
    picard_tol * max(1, |E^k|_inf).

    The returned fields and temperature come from the last application of T.
    """
    own_pool = pool is None
    pool = pool or cfg.pool()
    try:
        bound = prepare_coupled(cfg, pool)
        E = EnergyTrajectory.constant(initial_energy(cfg, pool), cfg.n_steps, cfg.dt, bound.N)
        report = PicardReport(iterates=[E])
        for k in range(cfg.picard_max_iter):
            E_new, history, run = _apply_T(E, cfg, pool, progress=cfg.progress)
            delta = E_new.sup_distance(E)
            report.deltas.append(delta)
            report.iterates.append(E_new)
            threshold = cfg.picard_tol * max(1.0, E.sup)
            logger.info(f"Picard iteration {k + 1}: delta={delta:.3e} (threshold {threshold:.3e})")
            if delta <= threshold:
                report.converged = True
                ratios = report.contraction_ratios
                if ratios:
                    logger.info(f"Picard converged in {report.iterations} iterations, "
                                f"last contraction ratio {ratios[-1]:.3g}")
                return CoupledResult(states=run.states, theta=_theta_fields(history), energy=E_new,
                                     diagnostics=run.diagnostics, gronwall=bound, picard=report)
            E = E_new
        raise NonConvergenceError(f"Picard iteration did not converge in {cfg.picard_max_iter} iterations "
                                  f"(last delta {report.deltas[-1]:.3e})", report.deltas)
    finally:
        if own_pool:
            pool.close()


def run_coupled(cfg: CoupledConfig, pool: Optional[GridPool] = None) -> CoupledResult:
    if cfg.mode == PICARD:
        return picard_run(cfg, pool)
    return run_monolithic(cfg, pool)


def bump(n_steps: int, dt: float, delta: float) -> np.ndarray:
    """delta * sin^2(pi t / T) on the time grid: zero at both ends, smooth in between."""
    T = n_steps * dt
    if n_steps == 0:
        return np.zeros(1)
    t = dt * np.arange(n_steps + 1)
    return delta * np.sin(np.pi * t / T) ** 2


def continuity_probe(cfg: CoupledConfig, delta: float, baseline: Optional[EnergyTrajectory] = None,
                     pool: Optional[GridPool] = None) -> float:
    """|T(E* + p) - T(E*)|_inf / |p|_inf for the bump p of height ``delta``.

    ``baseline`` is the converged E*; it is computed with picard_run when omitted.
    """
    own_pool = pool is None
    pool = pool or cfg.pool()
    try:
        if baseline is None:
            result = picard_run(cfg, pool)
            baseline = result.picard.iterates[-2]
        p = bump(cfg.n_steps, cfg.dt, delta)
        p_norm = float(np.max(np.abs(p)))
        if p_norm == 0.0:
            return 0.0
        base = _apply_T(baseline, cfg, pool)[0]
        bumped = EnergyTrajectory(baseline.samples + p, baseline.dt, baseline.bound_N)
        moved = _apply_T(bumped, cfg, pool)[0]
        ratio = moved.sup_distance(base) / p_norm
        logger.info(f"Continuity probe delta={delta:g}: ratio {ratio:.6g}")
        return ratio
    finally:
        if own_pool:
            pool.close()


def relative_l2(a: np.ndarray, b: np.ndarray, dom: Domain) -> float:
    """|a - b| / |b| in the nodal quadrature norm; the absolute norm when b vanishes."""
    diff = a - b
    num = math.sqrt(max(integrate_nodal(diff * diff, dom), 0.0))
    den = math.sqrt(max(integrate_nodal(b * b, dom), 0.0))
    return num / den if den > 0 else num
