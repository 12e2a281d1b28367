"""Leapfrog solver for the linear Maxwell problem with a prescribed conductivity s(x, t).

    dD/dt + (s/eps) D - (1/mu) curl B = G
    dB/dt + (1/eps) curl D = 0,          D = 0 outside the conductor

B is stored half a step behind D. The damping term is time-centred and solved
pointwise, so the update is explicit, sign-correct for s >= 0 and stable for
any size of s.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import tqdm
from loguru import logger

from .data_types import EnergyTrajectory, FieldState, PhysicalConstants
from .domain import Domain
from .errors import CFLError, ConfigError, NumericError
from .materials import SourceG
from .parallel import SERIAL, GridPool
from .state import FaceField, curl_B, curl_D, field_energy, inner_nodes, staggered_energy

GSampler = Callable[[float], Optional[np.ndarray]]
SigmaSchedule = Union[Sequence[np.ndarray], Callable[[int], np.ndarray]]

DEFAULT_CFL_SAFETY = 0.9


@dataclass(frozen=True)
class MaxwellStepParams:
    dt: float
    cfl_safety: float = DEFAULT_CFL_SAFETY

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"time step must be positive, got {self.dt!r}", key="time.dt")
        if not 0 < self.cfl_safety <= 1:
            raise ConfigError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}", key="time.cfl_safety")


def max_stable_dt(dom: Domain, consts: PhysicalConstants, cfl_safety: float = DEFAULT_CFL_SAFETY) -> float:
    """Largest admissible step: cfl_safety * h * sqrt(eps mu) / sqrt(2)."""
    return cfl_safety * dom.h * math.sqrt(consts.eps * consts.mu) / math.sqrt(2.0)


def check_cfl(params: MaxwellStepParams, dom: Domain, consts: PhysicalConstants):
    limit = max_stable_dt(dom, consts, params.cfl_safety)
    if params.dt > limit * (1 + 1e-12):
        raise CFLError(f"dt={params.dt:.6g} exceeds the CFL limit {limit:.6g} "
                       f"(h={dom.h:.6g}, safety={params.cfl_safety})", key="time.dt")


def as_sampler(G: Union[SourceG, GSampler, None], dom: Domain) -> GSampler:
    if G is None:
        return lambda t: None
    if isinstance(G, SourceG):
        return G.sampler(dom)
    return G


def stagger_initial_b(D0: np.ndarray, B0: FaceField, dom: Domain, dt: float, eps: float,
                      pool: GridPool = SERIAL) -> FaceField:
    """B^{-1/2} = B^0 + (dt / 2 eps) curl_D(D^0): half a step backwards in time."""
    cx, cy = curl_D(D0, dom, pool)
    c = 0.5 * dt / eps
    return B0[0] + c * cx, B0[1] + c * cy


def initial_state(D0: np.ndarray, B0: FaceField, dom: Domain, params: MaxwellStepParams,
                  consts: PhysicalConstants, pool: GridPool = SERIAL) -> FieldState:
    if not dom.is_field_clean(D0):
        raise ConfigError("initial Dz must vanish outside the conductor", key="initial.dz")
    Bx, By = stagger_initial_b(D0, B0, dom, params.dt, consts.eps, pool)
    return FieldState(Dz=np.array(D0, dtype=np.float64), Bx=Bx, By=By, t=0.0, step=0)


def advance_b(state: FieldState, dom: Domain, dt: float, eps: float, pool: GridPool = SERIAL) -> FaceField:
    """B^{n+1/2} = B^{n-1/2} - (dt/eps) curl_D(D^n)."""
    cx, cy = curl_D(state.Dz, dom, pool)
    c = dt / eps
    return state.Bx - c * cx, state.By - c * cy


def advance_d(Dz: np.ndarray, B_next: FaceField, s_field: np.ndarray, G_half: Optional[np.ndarray],
              dt: float, consts: PhysicalConstants, dom: Domain, pool: GridPool = SERIAL) -> np.ndarray:
    """Centred damping solved in closed form:

        D^{n+1} = [(1 - alpha) D^n + dt (curl_B(B^{n+1/2}) / mu + G)] / (1 + alpha),
        alpha = s dt / (2 eps)
    """
    rhs = curl_B(B_next[0], B_next[1], dom, pool) / consts.mu
    if G_half is not None:
        rhs = rhs + G_half
    alpha = s_field * (0.5 * dt / consts.eps)
    D_next = ((1.0 - alpha) * Dz + dt * rhs) / (1.0 + alpha)
    return dom.apply_field_mask(D_next)


def maxwell_step(state: FieldState, s_field: np.ndarray, G_at: Union[SourceG, GSampler, None],
                 params: MaxwellStepParams, consts: PhysicalConstants, dom: Domain,
                 pool: GridPool = SERIAL, B_next: Optional[FaceField] = None) -> FieldState:
    """Advance (D^n, B^{n-1/2}) to (D^{n+1}, B^{n+1/2}) with the conductivity field ``s_field``.

    ``B_next`` may be passed when the caller already computed B^{n+1/2}
    (the coupled driver needs it for the energy before it knows s).
    """
    check_cfl(params, dom, consts)
    if not dom.is_field_clean(state.Dz):
        raise NumericError("Dz is not zero outside the conductor", step=state.step)
    dt = params.dt
    if B_next is None:
        B_next = advance_b(state, dom, dt, consts.eps, pool)
    G_half = as_sampler(G_at, dom)(state.t + 0.5 * dt)
    D_next = advance_d(state.Dz, B_next, s_field, G_half, dt, consts, dom, pool)
    new = FieldState(Dz=D_next, Bx=B_next[0], By=B_next[1], t=(state.step + 1) * dt, step=state.step + 1)
    if not new.is_finite():
        raise NumericError("non-finite field values, aborting", step=state.step)
    return new


@dataclass
class StepDiagnostics:
    """One row of the diagnostics stream.

    ``E`` is the leapfrog energy of level n, ``E_sync`` the total energy of
    D^n and the time-synchronized B^n. ``dissipation``, ``source_power`` and
    ``residual`` describe the step that produced level n (zero on row 0).
    """

    step: int
    t: float
    E: float
    E_sync: float
    dissipation: float = 0.0
    source_power: float = 0.0
    residual: float = 0.0


class EnergyLedger:
    """Accumulates per-level energies and per-step balance terms.

    The residual of step n is
        (E_sync^{n+1} - E_sync^n)/dt + (1/eps^2) <s D^{n+1/2}, D^{n+1/2}> - (1/eps) <G, D^{n+1/2}>,
    which is O(dt^2) for the scheme.
    """

    def __init__(self, dom: Domain, consts: PhysicalConstants, dt: float, pool: GridPool = SERIAL):
        self.dom = dom
        self.consts = consts
        self.dt = dt
        self.pool = pool
        self.rows: List[StepDiagnostics] = []
        self._pending = (0.0, 0.0)

    def level(self, n: int, Dz: np.ndarray, B_prev: FaceField, B_next: FaceField) -> float:
        eps, mu = self.consts.eps, self.consts.mu
        E = staggered_energy(Dz, B_prev, B_next, self.dom, eps, mu, self.pool)
        B_sync = (0.5 * (B_prev[0] + B_next[0]), 0.5 * (B_prev[1] + B_next[1]))
        E_sync = field_energy(Dz, B_sync[0], B_sync[1], self.dom, eps, mu, self.pool)
        row = StepDiagnostics(step=n, t=n * self.dt, E=E, E_sync=E_sync)
        if self.rows:
            row.dissipation, row.source_power = self._pending
            row.residual = (E_sync - self.rows[-1].E_sync) / self.dt + row.dissipation - row.source_power
        self.rows.append(row)
        return E

    def interval(self, s_field: np.ndarray, D_old: np.ndarray, D_new: np.ndarray, G_half: Optional[np.ndarray]):
        eps = self.consts.eps
        D_mid = 0.5 * (D_old + D_new)
        dissipation = inner_nodes(s_field * D_mid, D_mid, self.dom, self.pool) / eps ** 2
        source = 0.0 if G_half is None else inner_nodes(G_half, D_mid, self.dom, self.pool) / eps
        self._pending = (dissipation, source)

    def trajectory(self, bound_N: Optional[float] = None) -> EnergyTrajectory:
        return EnergyTrajectory(np.array([row.E for row in self.rows]), self.dt, bound_N)

    @property
    def max_residual(self) -> float:
        return max((abs(row.residual) for row in self.rows), default=0.0)


@dataclass
class LinearRun:
    states: List[FieldState]
    energy: EnergyTrajectory
    diagnostics: List[StepDiagnostics] = field(default_factory=list)
    probe_values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def final(self) -> FieldState:
        return self.states[-1]


def n_steps_for(T_final: float, dt: float) -> int:
    """Number of uniform steps of size dt covering [0, T_final]."""
    if T_final < 0:
        raise ConfigError(f"T_final must be >= 0, got {T_final}", key="time.T_final")
    return int(math.ceil(T_final / dt - 1e-9))


def _schedule(s_of_t: SigmaSchedule) -> Callable[[int], np.ndarray]:
    if callable(s_of_t):
        return s_of_t
    return lambda n: s_of_t[n]


def run_linear(D0: np.ndarray, B0: FaceField, s_of_t: SigmaSchedule, G: Union[SourceG, GSampler, None],
               T_final: float, params: MaxwellStepParams, consts: PhysicalConstants, dom: Domain,
               pool: GridPool = SERIAL, snapshot_stride: Optional[int] = None,
               probe: Optional[Callable[[FieldState], float]] = None, progress: bool = False) -> LinearRun:
    """Integrate the linear problem over [0, T_final] with s given at every step.

    Parameters
    ----------
    s_of_t : sequence of nodal fields or callable
        ``s_of_t[n]`` (or ``s_of_t(n)``) is the conductivity used for the step
        n -> n+1.
    snapshot_stride : int, optional
        Keep every stride-th FieldState in the returned trajectory. The initial
        and final states are always kept.
    probe : callable, optional
        Called on every FieldState (initial one included); the values end up
        in ``LinearRun.probe_values``. Cheap way to follow a point signal
        without keeping the fields.
    """
    check_cfl(params, dom, consts)
    dt = params.dt
    n_steps = n_steps_for(T_final, dt)
    s_at = _schedule(s_of_t)
    G_at = as_sampler(G, dom)
    state = initial_state(D0, B0, dom, params, consts, pool)
    states = [state]
    probe_values = [probe(state)] if probe else []
    ledger = EnergyLedger(dom, consts, dt, pool)

    steps = range(n_steps)
    if progress:
        steps = tqdm.tqdm(steps, desc="Maxwell steps", total=n_steps)
    for n in steps:
        s_n = s_at(n)
        new = maxwell_step(state, s_n, G_at, params, consts, dom, pool)
        ledger.level(n, state.Dz, (state.Bx, state.By), (new.Bx, new.By))
        ledger.interval(s_n, state.Dz, new.Dz, G_at(state.t + 0.5 * dt))
        state = new
        if probe:
            probe_values.append(probe(state))
        if snapshot_stride and state.step % snapshot_stride == 0 and state.step != n_steps:
            states.append(state)

    ledger.level(n_steps, state.Dz, (state.Bx, state.By), advance_b(state, dom, dt, consts.eps, pool))
    if n_steps > 0:
        states.append(state)
    logger.debug(f"Linear run: {n_steps} steps, E(0)={ledger.rows[0].E:.6g}, E(T)={ledger.rows[-1].E:.6g}")
    return LinearRun(states=states, energy=ledger.trajectory(), diagnostics=ledger.rows,
                     probe_values=np.array(probe_values))


def gronwall_envelope(F0: float, C1: float, C2: float, t):
    """(F0 + C1 t) exp(C2 t), the integrated form of F' <= C1 + C2 F."""
    t = np.asarray(t, dtype=np.float64)
    return (F0 + C1 * t) * np.exp(C2 * t)


def cavity_frequency(times: np.ndarray, signal: np.ndarray) -> float:
    """Angular frequency of an oscillating signal from its zero crossings.

    Crossing times are located by linear interpolation; consecutive crossings
    are half a period apart.
    """
    times = np.asarray(times, dtype=np.float64)
    signal = np.asarray(signal, dtype=np.float64)
    idx = np.nonzero(np.signbit(signal[:-1]) != np.signbit(signal[1:]))[0]
    idx = idx[signal[idx] != signal[idx + 1]]
    if len(idx) < 2:
        raise NumericError(f"need at least two zero crossings, found {len(idx)}")
    frac = signal[idx] / (signal[idx] - signal[idx + 1])
    crossings = times[idx] + frac * (times[idx + 1] - times[idx])
    half_period = float(np.mean(np.diff(crossings)))
    return math.pi / half_period
