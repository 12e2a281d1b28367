"""Run configuration: JSON documents, scenario presets and assembly of runtime objects.

A RunConfig mirrors the JSON document section by section. Unknown keys are
rejected with their dotted path so that a typo never silently falls back to a
default. ``RunConfig.to_dict()`` is the echo written to report.json; loading it
again reproduces the run.
"""

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
import yaml
from loguru import logger

from .coupled import MODES, MONOLITHIC, CoupledConfig
from .data_types import PhysicalConstants
from .domain import ANNULUS, RECTANGLE, Domain, build_domain
from .errors import ConfigError
from .materials import (AFFINE_CLAMPED, CONSTANT, DEFAULT_THETA_MAX, TABULATED, ConductivityModel, SourceG,
                        SpatialFactor, SpatialProfile, TemporalProfile, load_tabulated_conductivity)
from .maxwell_solver import DEFAULT_CFL_SAFETY, max_stable_dt
from .oracle import annulus_b0
from .parallel import resolve_threads
from .state import FaceField

PRESETS_FILE = Path(__file__).with_name("presets.yaml")

INITIAL_KINDS = ("zero", "cavity_mode", "annulus_b0", "uniform_b")


@dataclass(frozen=True)
class DomainSection:
    kind: str = RECTANGLE
    n: int = 64
    width: float = 1.0
    height: float = 1.0


@dataclass(frozen=True)
class ConstantsSection:
    eps: float = 1.0
    mu: float = 1.0
    kappa: float = 1.0


@dataclass(frozen=True)
class ConductivitySection:
    kind: str = CONSTANT
    params: Dict[str, Any] = field(default_factory=dict)
    sigma0: Optional[float] = None
    sigma1: Optional[float] = None
    spatial: Dict[str, Any] = field(default_factory=dict)
    theta_max: float = DEFAULT_THETA_MAX


@dataclass(frozen=True)
class SourceSection:
    kind: str = "zero"
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class InitialSection:
    """Initial data: a named preset and its parameters, and/or .npy files.

    Files override the corresponding preset field.
    """

    preset: str = "zero"
    amplitude: float = 1.0
    bx: float = 1.0
    by: float = 0.0
    dz_path: Optional[str] = None
    bx_path: Optional[str] = None
    by_path: Optional[str] = None
    theta_path: Optional[str] = None


@dataclass(frozen=True)
class TimeSection:
    T_final: float = 1.0
    dt: Optional[float] = None
    cfl_auto: bool = True


@dataclass(frozen=True)
class SolverSection:
    mode: str = MONOLITHIC
    picard_tol: float = 1e-8
    picard_max_iter: int = 100
    cfl_safety: float = DEFAULT_CFL_SAFETY
    cg_tol: float = 1e-10
    cg_max_iter: Optional[int] = None


@dataclass(frozen=True)
class OutputSection:
    dir: str = "maxheat_out"
    snapshot_stride: Optional[int] = None
    fields: bool = False
    theta_stride: int = 1


@dataclass(frozen=True)
class RunConfig:
    domain: DomainSection = field(default_factory=DomainSection)
    constants: ConstantsSection = field(default_factory=ConstantsSection)
    conductivity: ConductivitySection = field(default_factory=ConductivitySection)
    source: SourceSection = field(default_factory=SourceSection)
    initial: InitialSection = field(default_factory=InitialSection)
    time: TimeSection = field(default_factory=TimeSection)
    solver: SolverSection = field(default_factory=SolverSection)
    output: OutputSection = field(default_factory=OutputSection)
    threads: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def replace(self, **sections) -> "RunConfig":
        return dataclasses.replace(self, **sections)


SECTIONS = {
    "domain": DomainSection,
    "constants": ConstantsSection,
    "conductivity": ConductivitySection,
    "source": SourceSection,
    "initial": InitialSection,
    "time": TimeSection,
    "solver": SolverSection,
    "output": OutputSection,
}


def _check_keys(data: Dict[str, Any], allowed, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"expected an object, got {type(data).__name__}", key=path or None)
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown key (allowed: {', '.join(sorted(allowed))})",
                              key=f"{path}.{key}" if path else key)


def _section(cls, data: Optional[Dict[str, Any]], path: str):
    if data is None:
        return cls()
    names = {f.name for f in dataclasses.fields(cls)}
    _check_keys(data, names, path)
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(str(exc), key=path) from exc


def parse_config(data: Dict[str, Any]) -> RunConfig:
    """Turn a JSON-like document into a validated RunConfig."""
    _check_keys(data, set(SECTIONS) | {"threads"}, "")
    sections = {name: _section(cls, data.get(name), name) for name, cls in SECTIONS.items()}
    cfg = RunConfig(threads=data.get("threads"), **sections)
    validate_config(cfg)
    return cfg


def _positive(value, key: str, integer: bool = False):
    ok = isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value) and value > 0
    if integer:
        ok = ok and int(value) == value
    if not ok:
        raise ConfigError(f"must be a positive {'integer' if integer else 'number'}, got {value!r}", key=key)


def validate_config(cfg: RunConfig):
    """Checks that do not need the grid; the rest happens in build_runtime."""
    _positive(cfg.domain.n, "domain.n", integer=True)
    for name in ("eps", "mu", "kappa"):
        _positive(getattr(cfg.constants, name), f"constants.{name}")
    if cfg.conductivity.kind not in (CONSTANT, AFFINE_CLAMPED, TABULATED):
        raise ConfigError(f"unknown conductivity kind {cfg.conductivity.kind!r}", key="conductivity.kind")
    if cfg.initial.preset not in INITIAL_KINDS:
        raise ConfigError(f"unknown initial preset {cfg.initial.preset!r}, expected one of {INITIAL_KINDS}",
                          key="initial.preset")
    if not isinstance(cfg.time.T_final, (int, float)) or cfg.time.T_final < 0:
        raise ConfigError(f"must be >= 0, got {cfg.time.T_final!r}", key="time.T_final")
    if cfg.time.dt is not None:
        _positive(cfg.time.dt, "time.dt")
    elif not cfg.time.cfl_auto:
        raise ConfigError("either give dt or set cfl_auto", key="time.dt")
    if cfg.solver.mode not in MODES:
        raise ConfigError(f"unknown mode {cfg.solver.mode!r}, expected one of {MODES}", key="solver.mode")
    if cfg.output.snapshot_stride is not None:
        _positive(cfg.output.snapshot_stride, "output.snapshot_stride", integer=True)
    if cfg.threads is not None:
        _positive(cfg.threads, "threads", integer=True)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"configuration file {path} does not exist", key="config")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}", key="config") from exc
    logger.info(f"Loaded configuration from {path}")
    return parse_config(data)


def load_presets(path=PRESETS_FILE) -> Dict[str, Dict[str, Any]]:
    with open(path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f)["presets"]


def preset_config(name: str, n: Optional[int] = None, mode: Optional[str] = None,
                  T_final: Optional[float] = None) -> RunConfig:
    """RunConfig of a named preset with optional overrides of n, mode and T_final."""
    presets = load_presets()
    if name not in presets:
        raise ConfigError(f"unknown preset {name!r}, available: {', '.join(sorted(presets))}", key="preset")
    data = json.loads(json.dumps(presets[name]["config"]))
    if n is not None:
        data.setdefault("domain", {})["n"] = n
    if mode is not None:
        data.setdefault("solver", {})["mode"] = mode
    if T_final is not None:
        data.setdefault("time", {})["T_final"] = T_final
    return parse_config(data)


def _conductivity(sec: ConductivitySection) -> ConductivityModel:
    p = dict(sec.params)
    spatial = SpatialFactor(**_checked(sec.spatial, SpatialFactor, "conductivity.spatial"))
    extra = dict(spatial=spatial, theta_max=sec.theta_max)
    try:
        if sec.kind == CONSTANT:
            _check_keys(p, {"sigma_c"}, "conductivity.params")
            sigma1 = 0.0 if sec.sigma1 is None else sec.sigma1
            return ConductivityModel.constant(p.get("sigma_c", 0.0), sigma0=sec.sigma0, sigma1=sigma1, **extra)
        if sec.kind == AFFINE_CLAMPED:
            _check_keys(p, {"a", "b", "lo", "hi"}, "conductivity.params")
            return ConductivityModel.affine_clamped(p.get("a", 0.0), p.get("b", 0.0), p.get("lo", 0.0),
                                                    p.get("hi", 1.0), sigma0=sec.sigma0, sigma1=sec.sigma1, **extra)
        _check_keys(p, {"path", "xi", "sigma"}, "conductivity.params")
        if "path" in p:
            return load_tabulated_conductivity(p["path"], sigma0=sec.sigma0, sigma1=sec.sigma1, **extra)
        return ConductivityModel.tabulated(p.get("xi", ()), p.get("sigma", ()), sigma0=sec.sigma0,
                                           sigma1=sec.sigma1, **extra)
    except TypeError as exc:
        raise ConfigError(str(exc), key="conductivity.params") from exc


def _checked(data: Dict[str, Any], cls, path: str) -> Dict[str, Any]:
    _check_keys(data, {f.name for f in dataclasses.fields(cls)}, path)
    return data


def _source(sec: SourceSection) -> SourceG:
    _check_keys(sec.params, {"temporal", "spatial"}, "source.params")
    temporal = TemporalProfile(**_checked(sec.params.get("temporal", {}), TemporalProfile, "source.params.temporal"))
    spatial = SpatialProfile(**_checked(sec.params.get("spatial", {}), SpatialProfile, "source.params.spatial"))
    return SourceG(kind=sec.kind, temporal=temporal, spatial=spatial)


def _load_npy(path: str, shape: Tuple[int, int], key: str) -> np.ndarray:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{p} does not exist", key=key)
    arr = np.load(p)
    if arr.shape != shape:
        raise ConfigError(f"{p} has shape {arr.shape}, expected {shape}", key=key)
    return arr.astype(np.float64)


def initial_data(sec: InitialSection, dom: Domain) -> Tuple[np.ndarray, FaceField, np.ndarray]:
    """(D0, (Bx0, By0), theta0) on the grid of ``dom``."""
    D0 = dom.zeros()
    Bx, By = dom.face_zeros()
    theta0 = dom.zeros()

    if sec.preset == "cavity_mode":
        if dom.kind != RECTANGLE:
            raise ConfigError("cavity_mode needs a rectangle", key="initial.preset")
        X, Y = dom.coordinates()
        D0 = dom.apply_mask(sec.amplitude * np.sin(np.pi * X / dom.width) * np.sin(np.pi * Y / dom.height))
    elif sec.preset == "annulus_b0":
        if dom.kind != ANNULUS:
            raise ConfigError("annulus_b0 needs the annulus domain", key="initial.preset")
        (Xx, Yx), (Xy, Yy) = dom.face_coordinates()
        # only faces that carry quadrature weight are inside or next to the annulus
        on_x = dom.face_weights_x > 0
        on_y = dom.face_weights_y > 0
        tol = 2.0 * dom.h
        Bx[on_x] = sec.amplitude * annulus_b0(Xx[on_x], Yx[on_x], tol=tol)[0]
        By[on_y] = sec.amplitude * annulus_b0(Xy[on_y], Yy[on_y], tol=tol)[1]
    elif sec.preset == "uniform_b":
        Bx[:] = sec.bx
        By[:] = sec.by

    if sec.dz_path:
        D0 = _load_npy(sec.dz_path, dom.node_shape, "initial.dz_path")
    if sec.bx_path:
        Bx = _load_npy(sec.bx_path, dom.bx_shape, "initial.bx_path")
    if sec.by_path:
        By = _load_npy(sec.by_path, dom.by_shape, "initial.by_path")
    if sec.theta_path:
        theta0 = _load_npy(sec.theta_path, dom.node_shape, "initial.theta_path")
    return D0, (Bx, By), theta0


def resolve_dt(cfg: RunConfig, dom: Domain, consts: PhysicalConstants) -> float:
    if cfg.time.dt is not None:
        return float(cfg.time.dt)
    return max_stable_dt(dom, consts, cfg.solver.cfl_safety)


def build_runtime(cfg: RunConfig, progress: bool = False) -> CoupledConfig:
    """Assemble domain, materials, initial data and solver settings."""
    d = cfg.domain
    dom = build_domain(d.kind, d.n, d.width, d.height)
    c = cfg.constants
    consts = PhysicalConstants(eps=c.eps, mu=c.mu, kappa=c.kappa)
    model = _conductivity(cfg.conductivity)
    G = _source(cfg.source)
    D0, B0, theta0 = initial_data(cfg.initial, dom)
    dt = resolve_dt(cfg, dom, consts)
    s = cfg.solver
    runtime = CoupledConfig(
        dom=dom,
        consts=consts,
        model=model,
        G=G,
        D0=D0,
        B0=B0,
        theta0=theta0,
        T_final=float(cfg.time.T_final),
        dt=dt,
        mode=s.mode,
        picard_tol=s.picard_tol,
        picard_max_iter=s.picard_max_iter,
        cfl_safety=s.cfl_safety,
        cg_tol=s.cg_tol,
        cg_max_iter=s.cg_max_iter,
        snapshot_stride=cfg.output.snapshot_stride,
        theta_stride=cfg.output.theta_stride,
        threads=resolve_threads(cfg.threads),
        progress=progress,
    )
    logger.info(f"Runtime: {dom}, {model.kind} conductivity, source {G.kind}, initial {cfg.initial.preset}, "
                f"dt={dt:.6g}, T={cfg.time.T_final}, mode={s.mode}, threads={runtime.threads}")
    return runtime
