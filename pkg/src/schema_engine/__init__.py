"""A deterministic simulator of self-constructing schema networks."""
from .errors import ConfigError, SnapshotError, StructuralIntegrityError, TraceFormatError
from .patterns import SHARP
from .config import RunConfig, load_config, parse_config, scenario_path
from .runtime import Agent, Simulation, build_agent, run, tick

__all__ = [
    "SHARP", "Agent", "Simulation", "RunConfig", "ConfigError", "SnapshotError",
    "StructuralIntegrityError", "TraceFormatError", "build_agent", "load_config",
    "parse_config", "run", "scenario_path", "tick",
]
