"""Fast acceptance checks behind ``maxheat verify``.

Each check returns a :class:`CheckResult`; ``run_verification`` collects them.
Grid sizes default to small values so the whole suite runs in a few minutes;
the annulus checks always use n >= 128 because its staircase boundary is
only first-order accurate.
"""

import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np
from loguru import logger

from .config import ConductivitySection, build_runtime, preset_config
from .coupled import MONOLITHIC, PICARD, continuity_probe, picard_run, relative_l2, run_monolithic
from .domain import ANNULUS, RECTANGLE, build_domain
from .errors import MaxHeatError
from .heat_solver import run_to_steady
from .maxwell_solver import MaxwellStepParams, cavity_frequency, max_stable_dt, run_linear
from .data_types import PhysicalConstants
from .oracle import annulus_energy, radial_steady_theta, square_torsion_center
from .state import curl_B, curl_D, inner_faces, inner_nodes


SBP_PAIRS = 100


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


def sbp_defect(kind: str, n: int, pairs: int = SBP_PAIRS, seed: int = 0) -> float:
    """Largest relative mismatch of <curl_B B, D> and <B, curl_D D> over random pairs."""
    rng = np.random.default_rng(seed)
    dom = build_domain(kind, n)
    worst = 0.0
    for _ in range(pairs):
        D = dom.apply_field_mask(rng.standard_normal(dom.node_shape))
        B = (rng.standard_normal(dom.bx_shape), rng.standard_normal(dom.by_shape))
        lhs = inner_nodes(curl_B(B[0], B[1], dom), D, dom)
        rhs = inner_faces(B, curl_D(D, dom), dom)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    return worst


def check_sbp(n: int) -> CheckResult:
    value = max(sbp_defect(RECTANGLE, n), sbp_defect(ANNULUS, n))
    return CheckResult("summation by parts", value <= 1e-12, value, 1e-12, f"{SBP_PAIRS} random pairs per domain")


def check_conservation(n: int) -> CheckResult:
    dom = build_domain(RECTANGLE, n)
    consts = PhysicalConstants()
    X, Y = dom.coordinates()
    D0 = dom.apply_mask(np.sin(np.pi * X) * np.sin(np.pi * Y))
    params = MaxwellStepParams(dt=max_stable_dt(dom, consts))
    centre = (n // 2, n // 2)
    run = run_linear(D0, dom.face_zeros(), lambda k: dom.zeros(), None, 5.0, params, consts, dom,
                     probe=lambda s: float(s.Dz[centre]))
    E = run.energy.samples
    drift = float(np.max(np.abs(E - E[0])) / E[0])
    omega = cavity_frequency(run.energy.times, run.probe_values)
    freq_err = abs(omega - math.sqrt(2.0) * math.pi) / (math.sqrt(2.0) * math.pi)
    return CheckResult("cavity energy conservation", drift <= 1e-10 and freq_err <= 0.01, drift, 1e-10,
                       f"omega={omega:.5f}, relative frequency error {freq_err:.2e}")


def check_dissipation(n: int) -> CheckResult:
    cfg = preset_config("dissipative_cavity", n=n, T_final=1.0)
    runtime = build_runtime(cfg)
    coarse = run_monolithic(runtime)
    E = coarse.energy.samples
    increases = float(np.max(np.diff(E))) if len(E) > 1 else 0.0
    monotone = increases <= 1e-12 * E[0]
    runtime.dt = runtime.dt / 2
    fine = run_monolithic(runtime)
    r_coarse = max(abs(row.residual) for row in coarse.diagnostics)
    r_fine = max(abs(row.residual) for row in fine.diagnostics)
    ratio = r_coarse / r_fine if r_fine > 0 else math.inf
    return CheckResult("dissipation sign and energy identity", monotone and ratio >= 3.0, ratio, 3.0,
                       f"largest increase {increases:.2e}, residuals {r_coarse:.2e} -> {r_fine:.2e}")


def check_zero_data_and_threads(n: int) -> CheckResult:
    cfg = preset_config("zero_data", n=n)
    runtime = build_runtime(cfg)
    result = run_monolithic(runtime)
    zero = all(not s.Dz.any() and not s.Bx.any() and not s.By.any() for s in result.states)
    zero = zero and all(not th.theta.any() for th in result.theta) and not result.energy.samples.any()

    reference = None
    identical = True
    weak = preset_config("weak_coupling_cavity", n=n, mode=MONOLITHIC, T_final=0.25)
    for threads in (1, 2, 8):
        runtime = build_runtime(weak.replace(threads=threads))
        res = run_monolithic(runtime)
        snapshot = (res.energy.samples, res.final_theta.theta, res.final_state.Dz)
        if reference is None:
            reference = snapshot
        else:
            identical = identical and all(np.array_equal(a, b) for a, b in zip(reference, snapshot))
    return CheckResult("zero data and thread determinism", zero and identical, float(not (zero and identical)), 0.0,
                       f"zero={zero}, identical across 1/2/8 threads={identical}")


def check_annulus(n: int = 128) -> CheckResult:
    cfg = preset_config("annulus_static_b", n=n)
    runtime = build_runtime(cfg)
    result = run_monolithic(runtime)
    dom = runtime.dom
    E = result.energy.samples
    drift = float(np.max(np.abs(E - E[0])) / E[0])
    oracle = radial_steady_theta(runtime.consts.kappa, runtime.consts.mu)
    X, Y = dom.coordinates()
    reference = dom.apply_mask(oracle.at(np.hypot(X, Y)))
    err = relative_l2(result.final_theta.theta, reference, dom)
    ok = drift <= 0.01 and err <= 0.05 and E.max() <= result.gronwall.N
    return CheckResult("annulus static field heating", ok, err, 0.05,
                       f"E(0)={E[0]:.5f} (continuum {annulus_energy(runtime.consts.mu):.5f}), energy drift {drift:.2e}")


def check_annulus_refined(n: int) -> CheckResult:
    return check_annulus(max(n, 128))


def check_square_uniform_b(n: int) -> CheckResult:
    cfg = preset_config("square_uniform_b", n=n)
    runtime = build_runtime(cfg)
    result = run_monolithic(runtime)
    E = result.energy.samples
    E_err = float(np.max(np.abs(E - 0.5 / runtime.consts.mu)))
    steady = run_to_steady(result.final_theta.theta, float(E[-1]), runtime.heat_params, runtime.consts.kappa,
                           runtime.dom)
    centre = steady.theta[n // 2, n // 2]
    expected = float(E[-1]) / runtime.consts.kappa * square_torsion_center()
    rel = abs(centre - expected) / expected
    ok = E_err <= 1e-12 and rel <= 0.01 and E.max() <= result.gronwall.N
    return CheckResult("square uniform field heating", ok, rel, 0.01, f"max |E - 1/2| = {E_err:.2e}")


def check_picard(n: int) -> CheckResult:
    cfg = preset_config("weak_coupling_cavity", n=n, mode=PICARD)
    runtime = build_runtime(cfg)
    picard = picard_run(runtime)
    runtime.mode = MONOLITHIC
    mono = run_monolithic(runtime)
    err = relative_l2(picard.final_theta.theta, mono.final_theta.theta, runtime.dom)
    limit = max(1e-6, 5 * runtime.dt)
    report = picard.picard
    fixed_point = report.deltas[-1] <= runtime.picard_tol * max(1.0, report.iterates[-2].sup)
    ok = report.converged and report.iterations <= 20 and err <= limit and fixed_point
    return CheckResult("Picard fixed point", ok, err, limit,
                       f"{report.iterations} iterations, deltas {', '.join(f'{d:.1e}' for d in report.deltas)}")


def check_continuity(n: int) -> CheckResult:
    weak_cfg = preset_config("weak_coupling_cavity", n=n, T_final=0.5)
    constant = build_runtime(weak_cfg.replace(conductivity=ConductivitySection(params={"sigma_c": 0.5})))
    zero_ratio = continuity_probe(constant, 1e-3)
    weak = build_runtime(weak_cfg)
    baseline = picard_run(weak).picard.iterates[-2]
    q3 = continuity_probe(weak, 1e-3, baseline)
    q4 = continuity_probe(weak, 1e-4, baseline)
    spread = max(q3, q4) / min(q3, q4) if min(q3, q4) > 0 else math.inf
    ok = zero_ratio == 0.0 and spread <= 2.0
    return CheckResult("continuity of T", ok, spread, 2.0,
                       f"constant sigma ratio {zero_ratio:g}, quotients {q3:.4g} / {q4:.4g}")


CHECKS: List[Callable[[int], CheckResult]] = [
    check_sbp,
    check_conservation,
    check_dissipation,
    check_zero_data_and_threads,
    check_annulus_refined,
    check_square_uniform_b,
    check_picard,
    check_continuity,
]


def run_verification(n: int = 32, checks: Optional[List[Callable[[int], CheckResult]]] = None) -> List[CheckResult]:
    results = []
    for check in checks or CHECKS:
        try:
            result = check(n)
        except MaxHeatError as exc:
            result = CheckResult(getattr(check, "__name__", "check"), False, math.nan, math.nan, str(exc))
        logger.info(f"{'PASS' if result.passed else 'FAIL'} {result.name}: {result.value:.3g} "
                    f"(threshold {result.threshold:g}) {result.detail}")
        results.append(result)
    return results
