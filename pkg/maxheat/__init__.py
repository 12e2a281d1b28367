"""Microwave heating with a nonlocal electromagnetic-thermal coupling."""

__version__ = "0.1.0"

from .coupled import CoupledConfig, CoupledResult, picard_run, run_coupled, run_monolithic
from .data_types import EnergyTrajectory, FieldState, PhysicalConstants, ThetaField
from .domain import Domain, build_domain
from .errors import ConfigError, MaxHeatError, NonConvergenceError, NumericError
