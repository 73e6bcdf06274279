"""Deterministic simulator of free-space optical links between moving platforms."""

from .channel import AtmosphereSpec, LinkBudget, compute_link_budget, outage_probability, sample_fading
from .datalink import BufferSpec, ModemProfile, frame_success, simulate_delivery
from .engine import InvariantViolation, SimReport, budget_at, run, sweep
from .geometry import OrbitSpec, StaticPlatformSpec, line_of_sight, point_ahead, predict_passes, propagate
from .kernels import BACKEND
from .pat import PatConfig, PatMachine, Phase, fine_loop_residual
from .scenario import Scenario, ScenarioError, load_scenario, read_scenario
from .terminal import TerminalProfile, beam_divergence, builtin_profiles, duplex_plan_check

__version__ = "0.1.0"

__all__ = [
    "AtmosphereSpec",
    "BACKEND",
    "BufferSpec",
    "InvariantViolation",
    "LinkBudget",
    "ModemProfile",
    "OrbitSpec",
    "PatConfig",
    "PatMachine",
    "Phase",
    "Scenario",
    "ScenarioError",
    "SimReport",
    "StaticPlatformSpec",
    "TerminalProfile",
    "beam_divergence",
    "budget_at",
    "builtin_profiles",
    "compute_link_budget",
    "duplex_plan_check",
    "fine_loop_residual",
    "frame_success",
    "line_of_sight",
    "load_scenario",
    "outage_probability",
    "point_ahead",
    "predict_passes",
    "propagate",
    "read_scenario",
    "run",
    "sample_fading",
    "simulate_delivery",
    "sweep",
]
