"""Drive dynamics and primitive reinforcement."""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .errors import ConfigError


class DriveKind(str, Enum):
    APPETITIVE = "appetitive"
    AVERSIVE = "aversive"


@dataclass(frozen=True)
class Drive:
    name: str
    d: float
    d_max: float = 1.0
    alpha: float = 0.0
    kind: DriveKind = DriveKind.APPETITIVE


def step_drive(drive: Drive, a_t: float, I_t: float) -> Drive:
    """Advance a drive one tick.

    Appetitive drives grow toward ``d_max`` at rate ``alpha``; aversive drives
    decay toward 0 at the same rate. Reduction ``a_t`` scales with ``|d|`` and the
    incentive ``I_t`` with the remaining headroom ``|d_max - d|``. The result is
    clamped to ``[0, d_max]``.
    """
    if drive.d_max < 0:
        raise ConfigError(f"drive {drive.name!r}: d_max must be non-negative")
    d, top = drive.d, drive.d_max
    if drive.kind is DriveKind.APPETITIVE:
        spont = drive.alpha * abs(top - d)
    else:
        spont = -drive.alpha * abs(d)
    nxt = d + spont - a_t * abs(d) + I_t * abs(top - d)
    return replace(drive, d=min(top, max(0.0, nxt)))


def primitive_reward(drive_before: Drive, a_t: float) -> float:
    """Direct reinforcement ``e(t)``: the drive reduction applied this tick."""
    return float(a_t)
