"""Centroid position -> discrete direction command -> body-frame velocity.

Sign convention: a negative yaw rate turns the vehicle to the left.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Tuple

from .tracking import TrackedCentroid


class NavCommand(str, enum.Enum):
    FORWARD = "Forward"
    YAW_LEFT = "YawLeft"
    YAW_RIGHT = "YawRight"
    SEARCH = "Search"


@dataclass(frozen=True)
class NavConfig:
    forward_speed: float = 0.05
    yaw_rate: float = 0.3
    search_yaw_rate: float = 0.2
    # half-width of the Forward band as a fraction of frame width; 0.2 lets
    # the vehicle overshoot corners before it turns (see README)
    deadband_fraction: float = 0.1
    target_altitude: float = 1.0
    altitude_gain: float = 1.0
    max_climb_rate: float = 0.5

    def __post_init__(self):
        rates = (self.forward_speed, self.yaw_rate, self.search_yaw_rate,
                 self.altitude_gain, self.max_climb_rate)
        if min(rates) <= 0:
            raise ValueError("navigation speeds, rates and gains must be > 0")
        if not 0 < self.deadband_fraction < 0.5:
            raise ValueError("deadband_fraction must lie in (0, 0.5)")


@dataclass(frozen=True)
class VelocitySetpoint:
    vx_body: float
    yaw_rate: float
    vz: float


def decide(tracked: TrackedCentroid, frame_width: int, cfg: NavConfig = NavConfig()) -> NavCommand:
    if frame_width < 1:
        raise ValueError("frame_width must be >= 1")
    if not tracked.valid:
        return NavCommand.SEARCH
    center = frame_width / 2
    band = cfg.deadband_fraction * frame_width
    if tracked.cx < center - band:
        return NavCommand.YAW_LEFT
    if tracked.cx > center + band:
        return NavCommand.YAW_RIGHT
    return NavCommand.FORWARD


def altitude_rate(cfg: NavConfig, current_altitude: float) -> float:
    """Clamped proportional climb rate toward the target altitude."""
    vz = cfg.altitude_gain * (cfg.target_altitude - current_altitude)
    return max(-cfg.max_climb_rate, min(cfg.max_climb_rate, vz))


def command_to_setpoint(cmd: NavCommand, cfg: NavConfig, current_altitude: float) -> VelocitySetpoint:
    vz = altitude_rate(cfg, current_altitude)
    if cmd is NavCommand.FORWARD:
        return VelocitySetpoint(cfg.forward_speed, 0.0, vz)
    if cmd is NavCommand.YAW_LEFT:
        return VelocitySetpoint(0.0, -cfg.yaw_rate, vz)
    if cmd is NavCommand.YAW_RIGHT:
        return VelocitySetpoint(0.0, cfg.yaw_rate, vz)
    # hover and turn on the spot until a line shows up again
    return VelocitySetpoint(0.0, cfg.search_yaw_rate, vz)


def navigate_frame(tracked: TrackedCentroid, frame_width: int, cfg: NavConfig,
                   current_altitude: float) -> Tuple[NavCommand, VelocitySetpoint]:
    cmd = decide(tracked, frame_width, cfg)
    return cmd, command_to_setpoint(cmd, cfg, current_altitude)
