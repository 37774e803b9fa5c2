"""Closed-loop executor: takeoff, then render -> detect -> track -> navigate -> step."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from ..detection import DetectionResult, detect_line
from ..navigation import VelocitySetpoint, altitude_rate, navigate_frame
from ..simworld import MavState, PathProgress, RenderError, WorldSpec, initial_state, render_camera, step_dynamics
from ..tracking import CentroidTrack, TrackedCentroid, init_from, track_step
from .config import RunConfig


class RunStatus(str, enum.Enum):
    COMPLETED = "completed"
    MAX_DURATION = "max-duration"
    ERROR = "error"


TAKEOFF = "takeoff"
CRUISE = "cruise"


@dataclass(frozen=True)
class FrameRecord:
    frame: int
    t: float
    x: float
    y: float
    z: float
    yaw: float
    raw_cx: Optional[float]
    raw_cy: Optional[float]
    kf_cx: Optional[float]
    kf_cy: Optional[float]
    valid: bool
    command: Optional[str]  # None during takeoff
    vx: float
    yaw_rate: float
    vz: float
    detect_time: Optional[float]  # only when timing is enabled
    phase: str


@dataclass
class RunLog:
    records: List[FrameRecord] = field(default_factory=list)
    status: Optional[RunStatus] = None
    dt: float = 0.1
    message: str = ""

    def __len__(self):
        return len(self.records)


# frame_hook(frame_index, image, detection_result) for optional dumps
FrameHook = Callable[[int, np.ndarray, DetectionResult], None]


def _seed(base: int, stream: int, frame: int):
    return [base, stream, frame]


def run_simulation(cfg: RunConfig, world: Optional[WorldSpec] = None,
                   frame_hook: Optional[FrameHook] = None) -> RunLog:
    """Run one closed-loop flight.

    The vehicle starts on the ground at the path start, climbs until within
    ``takeoff_tolerance`` of the target altitude, then follows the line until
    the path is complete or ``duration_max`` runs out. Logged pose and
    setpoint are those of the frame's start; the step is applied afterwards.
    """
    world = cfg.load_world() if world is None else world
    sim, nav, cam = cfg.sim, cfg.nav, cfg.camera
    seed = sim.rng_seed
    n_max = int(round(sim.duration_max / sim.dt))

    log = RunLog(dt=sim.dt)
    state: MavState = initial_state(world, altitude=0.0)
    progress = PathProgress(world)
    track: Optional[CentroidTrack] = None
    phase = TAKEOFF

    for k in range(n_max):
        t = k * sim.dt
        if phase == TAKEOFF and abs(state.z - nav.target_altitude) <= cfg.takeoff_tolerance:
            phase = CRUISE

        raw = tracked = None
        command = None
        detect_time = None
        if phase == TAKEOFF:
            setpoint = VelocitySetpoint(0.0, 0.0, altitude_rate(nav, state.z))
        else:
            try:
                frame = render_camera(world, state, cam, sim.pixel_noise_sigma,
                                      noise_seed=_seed(seed, 1, k))
            except RenderError as exc:
                log.status = RunStatus.ERROR
                log.message = f"frame {k}: {exc}"
                return log
            result = detect_line(frame, cfg.detection, seed=_seed(seed, 0, k))
            if frame_hook is not None:
                frame_hook(k, frame, result)
            if cfg.output.timing:
                detect_time = result.timing
            raw = result.centroid
            if track is None and raw is not None:
                track = init_from(raw, cfg.tracker)
            if track is not None:
                track, tracked = track_step(track, raw)
            else:
                tracked = TrackedCentroid(float("nan"), float("nan"), None, False)
            cmd, setpoint = navigate_frame(tracked, cam.image_width, nav, state.z)
            command = cmd.value

        has_track = tracked is not None and track is not None
        log.records.append(FrameRecord(
            frame=k, t=t, x=state.x, y=state.y, z=state.z, yaw=state.yaw,
            raw_cx=None if raw is None else raw.cx,
            raw_cy=None if raw is None else raw.cy,
            kf_cx=tracked.cx if has_track else None,
            kf_cy=tracked.cy if has_track else None,
            valid=bool(tracked is not None and tracked.valid),
            command=command,
            vx=setpoint.vx_body, yaw_rate=setpoint.yaw_rate, vz=setpoint.vz,
            detect_time=detect_time, phase=phase,
        ))
        progress.update(state.x, state.y)
        if progress.completed:
            log.status = RunStatus.COMPLETED
            return log
        state = step_dynamics(state, setpoint, sim)

    log.status = RunStatus.MAX_DURATION
    return log
