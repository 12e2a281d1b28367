"""CSV and JSON outputs of a run."""

import json
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
from loguru import logger

from .config import RunConfig
from .coupled import CoupledConfig, CoupledResult
from .domain import NODE_EXTERIOR
from .errors import MaxHeatError
from .state import CSV_FMT, export_snapshot_csv

ENERGY_COLUMNS = ("step", "t", "E", "dissipation", "residual")


def _energy_table(result: CoupledResult):
    rows = result.diagnostics
    columns = list(ENERGY_COLUMNS)
    table = [[row.step, row.t, row.E, row.dissipation, row.residual] for row in rows]
    fmt = ["%d"] + [CSV_FMT] * 4
    if result.picard is not None:
        columns.append("picard_iter")
        fmt.append("%d")
        for line in table:
            line.append(result.picard.iterations)
    return np.array(table, dtype=np.float64).reshape(len(table), len(columns)), columns, fmt


def build_report(result: CoupledResult, run_cfg: RunConfig, runtime: CoupledConfig, wall_time: float,
                 version: str) -> Dict[str, Any]:
    energy = result.energy
    bound = result.gronwall
    report: Dict[str, Any] = {
        "config": run_cfg.to_dict(),
        "version": version,
        "threads": runtime.threads,
        "wall_time_s": wall_time,
        "dt": runtime.dt,
        "n_steps": runtime.n_steps,
        "domain": {"kind": runtime.dom.kind, "nx": runtime.dom.nx, "ny": runtime.dom.ny, "h": runtime.dom.h},
        "E0": float(energy.samples[0]),
        "E_final": float(energy.samples[-1]),
        "max_E": energy.sup,
        "max_residual": max((abs(row.residual) for row in result.diagnostics), default=0.0),
        "gronwall_N": bound.N,
        "gronwall": {"C1": bound.C1, "C2": bound.C2, "F0": bound.F0, "T": bound.T},
    }
    if result.picard is not None:
        report["picard"] = {
            "iterations": result.picard.iterations,
            "converged": result.picard.converged,
            "deltas": result.picard.deltas,
            "contraction_ratios": result.picard.contraction_ratios,
        }
    return report


def write_outputs(result: CoupledResult, run_cfg: RunConfig, runtime: CoupledConfig, out_dir=None,
                  wall_time: float = 0.0, version: Optional[str] = None) -> Path:
    """Write energy.csv, theta_final.csv, optional fields_<step>.csv and report.json.

    Returns the output directory.
    """
    from . import __version__

    out = Path(out_dir if out_dir is not None else run_cfg.output.dir)
    dom = runtime.dom
    current = out
    try:
        out.mkdir(parents=True, exist_ok=True)

        current = out / "energy.csv"
        table, columns, fmt = _energy_table(result)
        np.savetxt(current, table, fmt=fmt, delimiter=",", header=",".join(columns), comments="")

        current = out / "theta_final.csv"
        X, Y = dom.coordinates()
        keep = dom.node_kind != NODE_EXTERIOR
        theta = result.final_theta.theta
        np.savetxt(current, np.column_stack([X[keep], Y[keep], theta[keep]]), fmt=CSV_FMT, delimiter=",",
                   header="x,y,theta", comments="")

        if run_cfg.output.fields:
            thetas = {th.step: th.theta for th in result.theta}
            for state in result.states:
                current = out / f"fields_{state.step}.csv"
                export_snapshot_csv(current, state.Dz, state.Bx, state.By, thetas.get(state.step), dom)

        current = out / "report.json"
        report = build_report(result, run_cfg, runtime, wall_time, version or __version__)
        with open(current, "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2)
    except OSError as exc:
        raise MaxHeatError(f"cannot write {current}: {exc}") from exc
    logger.info(f"Wrote outputs to {out}")
    return out
