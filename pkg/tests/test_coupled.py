import numpy as np
import pytest

from maxheat.config import build_runtime, load_presets, preset_config
from maxheat.coupled import (MONOLITHIC, PICARD, CoupledConfig, bump, continuity_probe, gronwall_bound,
                             initial_energy, picard_T, picard_run, prepare_coupled, relative_l2, run_coupled,
                             run_monolithic)
from maxheat.data_types import EnergyTrajectory, PhysicalConstants
from maxheat.errors import CFLError, ConductivityBoundsError, ConfigError, NonConvergenceError
from maxheat.materials import ConductivityModel, SourceG, SpatialProfile, TemporalProfile
from maxheat.maxwell_solver import max_stable_dt

WEAK = ConductivityModel.affine_clamped(a=0.5, b=0.1, lo=0.0, hi=1.0)


@pytest.fixture
def make_cfg(unit_square, cavity_mode):
    def build(model=WEAK, D0=None, T_final=0.5, mode=MONOLITHIC, G=None, **kwargs):
        consts = PhysicalConstants()
        return CoupledConfig(
            dom=unit_square,
            consts=consts,
            model=model,
            G=G or SourceG(),
            D0=cavity_mode(unit_square) if D0 is None else D0,
            B0=unit_square.face_zeros(),
            theta0=unit_square.zeros(),
            T_final=T_final,
            dt=max_stable_dt(unit_square, consts),
            mode=mode,
            **kwargs,
        )

    return build


def test_zero_data_monolithic(make_cfg, unit_square):
    result = run_monolithic(make_cfg(D0=unit_square.zeros()))
    assert not result.energy.samples.any()
    assert all(not th.theta.any() for th in result.theta)
    assert not result.final_state.Dz.any()


def test_zero_data_picard_needs_one_application(make_cfg, unit_square):
    result = picard_run(make_cfg(D0=unit_square.zeros(), mode=PICARD))
    assert result.picard.converged
    assert result.picard.iterations == 1
    assert result.picard.deltas == [0.0]


def test_constant_conductivity_picard_needs_two_applications(make_cfg):
    cfg = make_cfg(model=ConductivityModel.constant(0.5), mode=PICARD)
    picard = picard_run(cfg)
    assert picard.picard.iterations == 2
    assert picard.picard.deltas[-1] == 0.0
    cfg.mode = MONOLITHIC
    mono = run_monolithic(cfg)
    np.testing.assert_allclose(picard.energy.samples, mono.energy.samples, rtol=1e-13)


def test_T_ignores_its_input_for_constant_conductivity(make_cfg):
    cfg = make_cfg(model=ConductivityModel.constant(0.5))
    low = picard_T(EnergyTrajectory.constant(0.0, cfg.n_steps, cfg.dt), cfg)
    high = picard_T(EnergyTrajectory.constant(5.0, cfg.n_steps, cfg.dt), cfg)
    np.testing.assert_array_equal(low.samples, high.samples)


def test_T_rejects_wrong_grid(make_cfg):
    cfg = make_cfg()
    with pytest.raises(ValueError):
        picard_T(EnergyTrajectory.constant(0.0, cfg.n_steps + 3, cfg.dt), cfg)


def test_picard_agrees_with_monolithic(make_cfg):
    cfg = make_cfg(mode=PICARD, picard_tol=1e-10)
    picard = picard_run(cfg)
    report = picard.picard
    assert report.converged
    assert 2 < report.iterations <= 20
    assert all(r < 1.0 for r in report.contraction_ratios)

    cfg.mode = MONOLITHIC
    mono = run_monolithic(cfg)
    assert picard.energy.sup_distance(mono.energy) <= 1e-8
    assert relative_l2(picard.final_theta.theta, mono.final_theta.theta, cfg.dom) <= 1e-6
    assert picard.final_theta.step == mono.final_theta.step == cfg.n_steps


def test_picard_non_convergence_reports_deltas(make_cfg):
    cfg = make_cfg(mode=PICARD, picard_max_iter=1)
    with pytest.raises(NonConvergenceError) as info:
        run_coupled(cfg)
    assert len(info.value.deltas) == 1
    assert info.value.deltas[0] > 0
    assert info.value.exit_code == 4


def test_gronwall_bound_without_source(make_cfg):
    cfg = make_cfg(model=ConductivityModel.constant(0.0))
    bound = gronwall_bound(cfg)
    E0 = initial_energy(cfg)
    assert E0 == pytest.approx(0.125, rel=1e-12)
    assert bound.C1 == 0.0
    assert bound.C2 == 0.0
    assert bound.N == pytest.approx(2.0 * E0, rel=1e-14)
    result = run_monolithic(cfg)
    assert result.energy.sup <= bound.N
    assert result.energy.in_K()


def test_gronwall_bound_with_source(make_cfg, unit_square):
    G = SourceG(kind="separable", temporal=TemporalProfile(kind="constant", amplitude=2.0),
                spatial=SpatialProfile(kind="uniform"))
    cfg = make_cfg(D0=unit_square.zeros(), G=G)
    bound = gronwall_bound(cfg)
    # uniform profile is masked to the interior: (15/16)^2 of the unit square
    assert bound.C1 == pytest.approx(4.0 * (15 / 16) ** 2)
    assert bound.C2 == pytest.approx(3.0)
    result = run_monolithic(cfg)
    assert result.energy.samples[-1] > 0
    assert np.all(result.energy.samples <= bound.envelope(result.energy.times) / 2.0)


def test_energy_decreases_without_source(make_cfg):
    result = run_monolithic(make_cfg())
    assert np.all(np.diff(result.energy.samples) <= 1e-15)
    assert result.final_theta.theta.max() > 0


def test_threads_do_not_change_results(make_cfg):
    serial = run_monolithic(make_cfg(threads=1))
    threaded = run_monolithic(make_cfg(threads=3))
    np.testing.assert_array_equal(serial.energy.samples, threaded.energy.samples)
    np.testing.assert_array_equal(serial.final_theta.theta, threaded.final_theta.theta)
    np.testing.assert_array_equal(serial.final_state.Dz, threaded.final_state.Dz)


def test_uniform_static_field_has_constant_energy(make_cfg, unit_square):
    cfg = make_cfg(D0=unit_square.zeros(), model=ConductivityModel.constant(1.0))
    Bx, By = unit_square.face_zeros()
    cfg.B0 = (Bx + 1.0, By)
    result = run_monolithic(cfg)
    np.testing.assert_allclose(result.energy.samples, 0.5, rtol=0, atol=1e-14)
    assert not result.final_state.Dz.any()
    assert result.final_theta.theta.max() > 0


def test_theta_stride(make_cfg):
    cfg = make_cfg(theta_stride=5)
    result = run_monolithic(cfg)
    steps = [th.step for th in result.theta]
    assert steps[0] == 0 and steps[-1] == cfg.n_steps
    assert all(s % 5 == 0 for s in steps[:-1])


def test_continuity_probe_vanishes_for_constant_conductivity(make_cfg):
    cfg = make_cfg(model=ConductivityModel.constant(0.5))
    baseline = EnergyTrajectory.constant(0.1, cfg.n_steps, cfg.dt)
    assert continuity_probe(cfg, 1e-3, baseline) == 0.0


def test_continuity_probe_is_stable_in_delta(make_cfg):
    cfg = make_cfg(mode=PICARD, picard_tol=1e-10)
    baseline = picard_run(cfg).picard.iterates[-2]
    q3 = continuity_probe(cfg, 1e-3, baseline)
    q4 = continuity_probe(cfg, 1e-4, baseline)
    assert 0 < q3 < 1
    assert max(q3, q4) / min(q3, q4) <= 2.0


def test_bump():
    p = bump(10, 0.1, 0.5)
    assert p[0] == 0.0 and p[-1] == pytest.approx(0.0, abs=1e-15)
    assert p.max() == pytest.approx(0.5)
    assert not bump(0, 0.1, 0.5).any()


def test_relative_l2(unit_square, cavity_mode):
    mode = cavity_mode(unit_square)
    assert relative_l2(1.1 * mode, mode, unit_square) == pytest.approx(0.1)
    assert relative_l2(mode, unit_square.zeros(), unit_square) > 0


def test_prepare_rejects_dirty_initial_data(make_cfg, unit_square):
    with pytest.raises(ConfigError) as info:
        prepare_coupled(make_cfg(D0=np.ones(unit_square.node_shape)))
    assert info.value.key == "initial.dz"

    cfg = make_cfg()
    cfg.theta0 = np.ones(unit_square.node_shape)
    with pytest.raises(ConfigError) as info:
        prepare_coupled(cfg)
    assert info.value.key == "initial.theta"

    cfg = make_cfg()
    cfg.B0 = (np.zeros((3, 3)), np.zeros((3, 3)))
    with pytest.raises(ConfigError) as info:
        prepare_coupled(cfg)
    assert info.value.key == "initial.b"


def test_prepare_rejects_cfl_violation(make_cfg):
    cfg = make_cfg()
    cfg.dt *= 2.0
    with pytest.raises(CFLError):
        run_monolithic(cfg)


def test_prepare_checks_conductivity_on_operating_range(make_cfg):
    steep = ConductivityModel.affine_clamped(a=0.0, b=1.0, lo=-1e9, hi=1e9, sigma0=200.0, theta_max=10.0)
    with pytest.raises(ConductivityBoundsError):
        prepare_coupled(make_cfg(model=steep))


def test_prepare_rejects_overwhelming_negative_conductivity(make_cfg, unit_square, consts):
    dt = max_stable_dt(unit_square, consts)
    with pytest.raises(ConfigError) as info:
        prepare_coupled(make_cfg(model=ConductivityModel.constant(-2.5 * consts.eps / dt)))
    assert info.value.key == "conductivity"
    assert info.value.exit_code == 2

    # 1 + s dt / (2 eps) = 0.75 stays positive
    prepare_coupled(make_cfg(model=ConductivityModel.constant(-0.5 * consts.eps / dt)))


@pytest.mark.parametrize("kwargs", [{"mode": "explicit"}, {"picard_tol": 0.0}, {"picard_max_iter": 0},
                                    {"theta_stride": 0}])
def test_config_validation(make_cfg, kwargs):
    with pytest.raises(ConfigError):
        make_cfg(**kwargs)


@pytest.mark.parametrize("name", sorted(load_presets()))
def test_presets_are_deterministic_across_thread_counts(name):
    cfg = preset_config(name, n=16, T_final=0.1)
    runs = [run_coupled(build_runtime(cfg.replace(threads=threads))) for threads in (1, 2, 8)]
    for other in runs[1:]:
        np.testing.assert_array_equal(other.energy.samples, runs[0].energy.samples)
        np.testing.assert_array_equal(other.final_theta.theta, runs[0].final_theta.theta)
        np.testing.assert_array_equal(other.final_state.Dz, runs[0].final_state.Dz)
