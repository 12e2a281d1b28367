"""Command line entry point: ``maxheat run``, ``maxheat verify`` and ``maxheat list-presets``.

Every :class:`~maxheat.errors.MaxHeatError` is logged and turned into its exit
code (2 configuration, 3 numerical failure, 4 Picard non-convergence), so
``main`` never lets a traceback reach the user for an expected failure.
"""

import dataclasses
import sys
import time
from typing import List, Optional

import click
from loguru import logger

from . import __version__
from .config import build_runtime, load_config, load_presets, preset_config
from .coupled import MODES, run_coupled
from .errors import ConfigError, MaxHeatError
from .outputs import write_outputs
from .verification import run_verification

EXIT_OK = 0
EXIT_FAILED_CHECKS = 3


def _configure_logging(verbose: bool, quiet: bool):
    logger.remove()
    level = "DEBUG" if verbose else "WARNING" if quiet else "INFO"
    logger.add(sys.stderr, level=level)


@click.group()
@click.version_option(__version__, prog_name="maxheat")
@click.option("--verbose", "-v", is_flag=True, default=False, help="Log every step (DEBUG level).")
@click.option("--quiet", "-q", is_flag=True, default=False, help="Only log warnings and errors.")
def cli(verbose, quiet):
    """Time-domain microwave heating: Maxwell fields with temperature dependent
    conductivity, heated by their own total energy."""
    _configure_logging(verbose, quiet)


@cli.command()
@click.option(
    "--config",
    "config_path",
    type=str,
    default=None,
    help="Path to a JSON run configuration. Mutually exclusive with --preset.",
)
@click.option(
    "--preset",
    type=str,
    default=None,
    help="Name of a scenario preset (see `list-presets`).",
)
@click.option(
    "--n",
    type=int,
    default=None,
    help="Override the number of cells per side.",
)
@click.option(
    "--mode",
    type=click.Choice(MODES),
    default=None,
    help="Override the solver: co-advancing monolithic steps or Picard iteration on E(t).",
)
@click.option(
    "--T-final",
    "T_final",
    type=float,
    default=None,
    help="Override the final time.",
)
@click.option(
    "--out",
    type=str,
    default=None,
    help="Output directory. Defaults to output.dir of the configuration.",
)
@click.option(
    "--threads",
    type=int,
    default=None,
    help="Worker threads for the grid sweeps. Falls back to the config, then MAXHEAT_THREADS.",
)
@click.option(
    "--progress/--no-progress",
    default=True,
    help="Show a progress bar while stepping.",
    show_default=True,
)
def run(config_path, preset, n, mode, T_final, out, threads, progress):
    """Run one simulation and write energy.csv, theta_final.csv and report.json."""
    if (config_path is None) == (preset is None):
        raise ConfigError("give exactly one of --config and --preset", key="cli")
    if config_path is not None:
        cfg = load_config(config_path)
        overrides = {}
        if n is not None:
            overrides["domain"] = dataclasses.replace(cfg.domain, n=n)
        if mode is not None:
            overrides["solver"] = dataclasses.replace(cfg.solver, mode=mode)
        if T_final is not None:
            overrides["time"] = dataclasses.replace(cfg.time, T_final=T_final)
        cfg = cfg.replace(**overrides)
    else:
        cfg = preset_config(preset, n=n, mode=mode, T_final=T_final)
    if threads is not None:
        cfg = cfg.replace(threads=threads)

    runtime = build_runtime(cfg, progress=progress)
    start = time.perf_counter()
    result = run_coupled(runtime)
    wall_time = time.perf_counter() - start
    out_dir = write_outputs(result, cfg, runtime, out_dir=out, wall_time=wall_time)
    click.echo(f"max E = {result.energy.sup:.6g}, Gronwall N = {result.gronwall.N:.6g}, "
               f"wall time {wall_time:.1f}s, outputs in {out_dir}")
    return EXIT_OK


@cli.command()
@click.option(
    "--n",
    type=int,
    default=32,
    help="Cells per side for the rectangle checks (the annulus check uses at least 128).",
    show_default=True,
)
def verify(n):
    """Run the oracle and invariant checks and print a pass/fail table."""
    results = run_verification(n)
    width = max(len(r.name) for r in results)
    for r in results:
        click.echo(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.value:.3e}  (threshold {r.threshold:g})"
                   f"  {r.detail}")
    failed = sum(not r.passed for r in results)
    click.echo(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_FAILED_CHECKS if failed else EXIT_OK


@cli.command("list-presets")
def list_presets():
    """List the scenario presets."""
    for name, preset in load_presets().items():
        click.echo(f"{name}: {preset['description']}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point returning the process exit code (config 2, numeric 3, non-convergence 4)."""
    try:
        code = cli.main(args=argv, prog_name="maxheat", standalone_mode=False)
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        exc.show()
        return ConfigError.exit_code
    except MaxHeatError as exc:
        logger.error(str(exc))
        return exc.exit_code
    # --help and --version return None
    return code if isinstance(code, int) else EXIT_OK
