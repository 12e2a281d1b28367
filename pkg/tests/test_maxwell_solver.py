import math

import numpy as np
import pytest

from maxheat.config import InitialSection, initial_data
from maxheat.data_types import PhysicalConstants
from maxheat.domain import ANNULUS, RECTANGLE, build_domain
from maxheat.errors import CFLError, ConfigError, NumericError
from maxheat.materials import SourceG, SpatialProfile, TemporalProfile
from maxheat.maxwell_solver import (MaxwellStepParams, cavity_frequency, gronwall_envelope, initial_state,
                                    max_stable_dt, maxwell_step, n_steps_for, run_linear)
from maxheat.parallel import GridPool


def _run(D0, dom, consts, T_final, sigma=0.0, G=None, dt=None, **kwargs):
    params = MaxwellStepParams(dt=dt or max_stable_dt(dom, consts))
    s = dom.apply_mask(np.full(dom.node_shape, sigma))
    return run_linear(D0, dom.face_zeros(), lambda n: s, G, T_final, params, consts, dom, **kwargs)


def test_zero_data_stays_zero(unit_square, consts):
    run = _run(unit_square.zeros(), unit_square, consts, 1.0, sigma=1.0)
    assert not run.energy.samples.any()
    for state in run.states:
        assert not state.Dz.any() and not state.Bx.any() and not state.By.any()


def test_cavity_energy_is_conserved(cavity_mode, consts):
    dom = build_domain(RECTANGLE, 32)
    centre = (16, 16)
    run = _run(cavity_mode(dom), dom, consts, 5.0, probe=lambda s: float(s.Dz[centre]))
    E = run.energy.samples
    assert np.max(np.abs(E - E[0])) <= 1e-11 * E[0]

    omega = cavity_frequency(run.energy.times, run.probe_values)
    assert omega == pytest.approx(math.sqrt(2.0) * math.pi, rel=0.01)


def test_energy_drops_by_exact_dissipation(unit_square, cavity_mode, consts):
    run = _run(cavity_mode(unit_square), unit_square, consts, 1.0, sigma=0.5)
    E = run.energy.samples
    dissipation = np.array([row.dissipation for row in run.diagnostics[1:]])
    assert np.all(dissipation >= 0)
    np.testing.assert_allclose(np.diff(E), -run.energy.dt * dissipation, rtol=0, atol=1e-12 * E[0])
    assert np.all(np.diff(E) <= 1e-15)


def test_energy_balance_with_source(unit_square, consts):
    G = SourceG(kind="separable", temporal=TemporalProfile(kind="sine", omega=3.0),
                spatial=SpatialProfile(kind="gaussian", width=0.2))
    run = _run(unit_square.zeros(), unit_square, consts, 1.0, sigma=0.2, G=G)
    E = run.energy.samples
    dt = run.energy.dt
    balance = np.array([row.source_power - row.dissipation for row in run.diagnostics[1:]])
    assert E.max() > 0
    np.testing.assert_allclose(np.diff(E), dt * balance, rtol=0, atol=1e-12 * E.max())


def test_energy_residual_is_second_order(cavity_mode, consts):
    dom = build_domain(RECTANGLE, 16)
    dt = max_stable_dt(dom, consts)
    coarse = _run(cavity_mode(dom), dom, consts, 1.0, sigma=0.5, dt=dt)
    fine = _run(cavity_mode(dom), dom, consts, 1.0, sigma=0.5, dt=dt / 2)
    r_coarse = max(abs(row.residual) for row in coarse.diagnostics)
    r_fine = max(abs(row.residual) for row in fine.diagnostics)
    assert r_coarse / r_fine >= 3.0


def test_cfl_violation(unit_square, cavity_mode, consts):
    dt = 2.0 * max_stable_dt(unit_square, consts)
    with pytest.raises(CFLError) as info:
        _run(cavity_mode(unit_square), unit_square, consts, 1.0, dt=dt)
    assert info.value.key == "time.dt"
    assert info.value.exit_code == 2


def test_zero_final_time(unit_square, cavity_mode, consts):
    run = _run(cavity_mode(unit_square), unit_square, consts, 0.0)
    assert len(run.energy) == 1
    assert len(run.states) == 1
    assert n_steps_for(0.0, 0.1) == 0
    assert n_steps_for(1.0, 0.1) == 10


def test_snapshot_stride_keeps_first_and_last(unit_square, cavity_mode, consts):
    dt = 0.01
    run = _run(cavity_mode(unit_square), unit_square, consts, 0.25, dt=dt, snapshot_stride=10)
    assert [s.step for s in run.states] == [0, 10, 20, 25]
    assert len(run.energy) == 26


def test_superposition(unit_square, cavity_mode, consts, rng):
    D1 = cavity_mode(unit_square)
    D2 = unit_square.apply_mask(rng.standard_normal(unit_square.node_shape))
    a = _run(D1, unit_square, consts, 0.5, sigma=0.3).final
    b = _run(D2, unit_square, consts, 0.5, sigma=0.3).final
    ab = _run(D1 + D2, unit_square, consts, 0.5, sigma=0.3).final
    np.testing.assert_allclose(ab.Dz, a.Dz + b.Dz, atol=1e-12)
    np.testing.assert_allclose(ab.Bx, a.Bx + b.Bx, atol=1e-12)


def test_large_conductivity_is_stable(unit_square, cavity_mode, consts):
    run = _run(cavity_mode(unit_square), unit_square, consts, 0.5, sigma=1e6)
    E = run.energy.samples
    assert np.all(np.isfinite(E))
    assert np.all(np.diff(E) <= 1e-15)


def test_threads_give_identical_runs(unit_square, cavity_mode, consts):
    reference = _run(cavity_mode(unit_square), unit_square, consts, 0.5, sigma=0.5)
    with GridPool(4) as pool:
        threaded = _run(cavity_mode(unit_square), unit_square, consts, 0.5, sigma=0.5, pool=pool)
    np.testing.assert_array_equal(reference.energy.samples, threaded.energy.samples)
    np.testing.assert_array_equal(reference.final.Dz, threaded.final.Dz)


def test_nan_aborts_with_step(unit_square, cavity_mode, consts):
    params = MaxwellStepParams(dt=max_stable_dt(unit_square, consts))
    state = initial_state(cavity_mode(unit_square), unit_square.face_zeros(), unit_square, params, consts)
    s = unit_square.zeros()
    s[5, 5] = np.nan
    with pytest.raises(NumericError) as info:
        maxwell_step(state, s, None, params, consts, unit_square)
    assert info.value.step == 0
    assert info.value.exit_code == 3


def test_dirty_initial_field_is_rejected(unit_square, consts):
    params = MaxwellStepParams(dt=0.01)
    D0 = np.ones(unit_square.node_shape)
    with pytest.raises(ConfigError):
        initial_state(D0, unit_square.face_zeros(), unit_square, params, consts)


@pytest.mark.parametrize("dt, safety", [(0.0, 0.9), (-1.0, 0.9), (math.nan, 0.9), (0.1, 1.5)])
def test_step_params_validation(dt, safety):
    with pytest.raises(ConfigError):
        MaxwellStepParams(dt=dt, cfl_safety=safety)


def test_max_stable_dt_scales_with_wave_speed(unit_square):
    slow = PhysicalConstants(eps=4.0, mu=1.0)
    assert max_stable_dt(unit_square, slow) == pytest.approx(2.0 * max_stable_dt(unit_square, PhysicalConstants()))


def test_cavity_frequency_of_synthetic_signal():
    t = np.arange(0.0, 10.0, 0.01)
    assert cavity_frequency(t, np.cos(3.0 * t)) == pytest.approx(3.0, rel=1e-4)
    with pytest.raises(NumericError):
        cavity_frequency(t, np.cos(0.1 * t))


def test_gronwall_envelope():
    np.testing.assert_allclose(gronwall_envelope(2.0, 0.0, 0.0, [0.0, 5.0]), [2.0, 2.0])
    assert gronwall_envelope(1.0, 1.0, 1.0, 1.0) == pytest.approx(2.0 * math.e)


def test_static_annulus_field_generates_only_small_D(consts):
    peaks = []
    for n in (64, 128):
        dom = build_domain(ANNULUS, n)
        _, B0, _ = initial_data(InitialSection(preset="annulus_b0"), dom)
        params = MaxwellStepParams(dt=max_stable_dt(dom, consts))
        s = dom.apply_mask(np.ones(dom.node_shape))
        run = run_linear(dom.zeros(), B0, lambda k: s, None, 0.5, params, consts, dom,
                         probe=lambda st: float(np.max(np.abs(st.Dz))))
        peaks.append(run.probe_values.max())
    assert peaks[0] / peaks[1] >= 3.0


def test_conductivity_schedule_is_evaluated_once_per_step(unit_square, cavity_mode, consts):
    calls = []
    s = unit_square.apply_mask(np.full(unit_square.node_shape, 0.5))

    def schedule(n):
        calls.append(n)
        return s

    params = MaxwellStepParams(dt=max_stable_dt(unit_square, consts))
    run = run_linear(cavity_mode(unit_square), unit_square.face_zeros(), schedule, None, 0.5, params, consts,
                     unit_square)
    n_steps = n_steps_for(0.5, params.dt)
    assert len(run.energy.samples) == n_steps + 1
    assert calls == list(range(n_steps))
