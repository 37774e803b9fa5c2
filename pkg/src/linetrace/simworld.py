"""Floor-path worlds, kinematic MAV model and a downward pinhole camera.

Frames
------
World: flat floor at z = 0, altitude z up. Yaw turns +x toward +y, so with
x pointing ahead the vehicle's right-hand side is +y and a negative yaw
rate is a left turn.

Camera: looks straight down; the image top is the body's forward
direction and image +x its right-hand side. The principal point sits at
(width/2, height/2) in continuous pixel coordinates; pixel (u, v) is
sampled at its centre (u + 0.5, v + 0.5).
"""

from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .imaging import Rgb
from .navigation import VelocitySetpoint

TWO_PI = 2 * math.pi


class WorldError(ValueError):
    pass


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.fmod(a + math.pi, TWO_PI)
    if w <= 0:
        w += TWO_PI
    return w - math.pi


@dataclass(frozen=True)
class Segment:
    start: Tuple[float, float]
    end: Tuple[float, float]

    @property
    def length(self) -> float:
        return math.dist(self.start, self.end)

    @property
    def start_point(self):
        return self.start

    @property
    def end_point(self):
        return self.end

    @property
    def heading(self) -> float:
        return math.atan2(self.end[1] - self.start[1], self.end[0] - self.start[0])

    def point_at(self, s: float):
        t = s / self.length
        return (self.start[0] + t * (self.end[0] - self.start[0]),
                self.start[1] + t * (self.end[1] - self.start[1]))

    def distance(self, px, py):
        """Euclidean distance from points to the segment (vectorised)."""
        (x0, y0), (x1, y1) = self.start, self.end
        dx, dy = x1 - x0, y1 - y0
        t = ((px - x0) * dx + (py - y0) * dy) / (dx * dx + dy * dy)
        t = np.clip(t, 0.0, 1.0)
        return np.hypot(px - (x0 + t * dx), py - (y0 + t * dy))

    def bounding_circle(self):
        cx, cy = (self.start[0] + self.end[0]) / 2, (self.start[1] + self.end[1]) / 2
        return (cx, cy), self.length / 2


@dataclass(frozen=True)
class Arc:
    """Circular arc from ``start_angle`` to ``end_angle`` (radians).

    ``direction`` is the sign of the angle change: +1 sweeps from +x toward
    +y, -1 the other way.
    """

    center: Tuple[float, float]
    radius: float
    start_angle: float
    end_angle: float
    direction: int

    def __post_init__(self):
        if self.radius <= 0:
            raise WorldError("arc radius must be positive")
        if self.direction not in (1, -1):
            raise WorldError("arc direction must be +1 or -1")
        sweep = self.end_angle - self.start_angle
        if sweep == 0 or (sweep > 0) != (self.direction > 0) or abs(sweep) > TWO_PI + 1e-12:
            raise WorldError("arc end_angle must lie within one turn of start_angle in its direction")

    @property
    def sweep(self) -> float:
        return abs(self.end_angle - self.start_angle)

    @property
    def length(self) -> float:
        return self.radius * self.sweep

    def _point(self, angle):
        return (self.center[0] + self.radius * math.cos(angle),
                self.center[1] + self.radius * math.sin(angle))

    @property
    def start_point(self):
        return self._point(self.start_angle)

    @property
    def end_point(self):
        return self._point(self.end_angle)

    def point_at(self, s: float):
        return self._point(self.start_angle + self.direction * s / self.radius)

    def distance(self, px, py):
        dx = px - self.center[0]
        dy = py - self.center[1]
        rho = np.hypot(dx, dy)
        phi = np.arctan2(dy, dx)
        t = np.mod((phi - self.start_angle) * self.direction, TWO_PI)
        on_arc = t <= self.sweep
        sx, sy = self.start_point
        ex, ey = self.end_point
        ends = np.minimum(np.hypot(px - sx, py - sy), np.hypot(px - ex, py - ey))
        return np.where(on_arc, np.abs(rho - self.radius), ends)

    def bounding_circle(self):
        return self.center, self.radius


PathElement = Union[Segment, Arc]


@dataclass(frozen=True)
class WorldSpec:
    path: Tuple[PathElement, ...]
    line_width: float = 0.15
    line_color: Rgb = (255, 255, 0)
    floor_color: Rgb = (128, 128, 128)
    bounds: Tuple[float, float, float, float] = (0.0, 0.0, 8.0, 6.0)
    name: str = "custom"

    def __post_init__(self):
        if not self.path:
            raise WorldError("world path is empty")
        if self.line_width <= 0:
            raise WorldError("line_width must be positive")
        for prev, nxt in zip(self.path, self.path[1:]):
            if math.dist(prev.end_point, nxt.start_point) > 1e-9:
                raise WorldError(f"path elements are not contiguous: {prev.end_point} -> {nxt.start_point}")
        for el in self.path:
            if isinstance(el, Arc) and el.radius <= self.line_width / 2:
                raise WorldError("arc radius must exceed half the line width")

    @property
    def length(self) -> float:
        return sum(el.length for el in self.path)

    @property
    def start_point(self):
        return self.path[0].start_point

    @property
    def end_point(self):
        return self.path[-1].end_point

    def start_heading(self) -> float:
        el = self.path[0]
        if isinstance(el, Segment):
            return el.heading
        return wrap_angle(el.start_angle + el.direction * math.pi / 2)

    def distance(self, px, py):
        px = np.asarray(px, dtype=float)
        py = np.asarray(py, dtype=float)
        d = np.full(np.broadcast(px, py).shape, np.inf)
        for el in self.path:
            d = np.minimum(d, el.distance(px, py))
        return d

    def sample(self, spacing: float = 0.01):
        """Points along the path with their arc-length coordinate."""
        pts, s_all = [], []
        offset = 0.0
        for el in self.path:
            n = max(1, int(math.ceil(el.length / spacing)))
            for k in range(n):
                s = el.length * k / n
                pts.append(el.point_at(s))
                s_all.append(offset + s)
            offset += el.length
        pts.append(self.end_point)
        s_all.append(offset)
        return np.array(pts), np.array(s_all)


def build_environment(env_id: str) -> WorldSpec:
    """Built-in replicas: ``env1`` (straight lines, right-angle corners) and
    ``env2`` (closed oval of 3 m and 1.5 m arcs)."""
    if env_id == "env1":
        pts = [(1.0, 1.0), (4.5, 1.0), (4.5, 3.5), (2.0, 3.5), (2.0, 5.0)]
        path = tuple(Segment(a, b) for a, b in zip(pts, pts[1:]))
        return WorldSpec(path=path, bounds=(0.0, 0.0, 8.0, 6.0), name="env1")
    if env_id == "env2":
        return WorldSpec(path=_oval((4.0, 3.0)), bounds=(0.0, 0.0, 8.0, 6.0), name="env2")
    raise WorldError(f"unknown environment {env_id!r} (expected env1 or env2)")


def _oval(origin, big=3.0, small=1.5):
    # four-arc oval: small-arc centres at (+-1.2, 0), big-arc centres at
    # (0, -+0.9); centre distance 1.5 = big - small keeps the arcs tangent
    ox, oy = origin
    alpha = math.atan2(3.0, 4.0)
    top = (ox, oy - 0.9)
    bottom = (ox, oy + 0.9)
    right = (ox + 1.2, oy)
    left = (ox - 1.2, oy)
    half = math.pi / 2
    return (
        Arc(top, big, half, alpha, -1),
        Arc(right, small, alpha, -alpha, -1),
        Arc(bottom, big, -alpha, -math.pi + alpha, -1),
        Arc(left, small, -math.pi + alpha, -math.pi - alpha, -1),
        Arc(top, big, math.pi - alpha, half, -1),
    )


@dataclass(frozen=True)
class MavState:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    yaw: float = 0.0
    vx_body: float = 0.0
    yaw_rate: float = 0.0
    vz: float = 0.0


@dataclass(frozen=True)
class CameraModel:
    image_width: int = 640
    image_height: int = 480
    vertical_fov: float = math.radians(60.0)
    # lens position ahead of the yaw axis along body forward, metres; a lens
    # on the axis sees no lateral image motion when yawing in place
    mount_offset: float = 0.4

    def __post_init__(self):
        if not 0 < self.vertical_fov < math.pi:
            raise WorldError("vertical_fov must lie in (0, pi)")
        if self.image_width < 16 or self.image_height < 16:
            raise WorldError("camera needs at least 16x16 pixels")

    @property
    def focal_px(self) -> float:
        return (self.image_height / 2) / math.tan(self.vertical_fov / 2)

    def lens_state(self, state: MavState) -> MavState:
        """``state`` moved to the lens position (same yaw and altitude)."""
        if self.mount_offset == 0:
            return state
        return replace(state,
                       x=state.x + self.mount_offset * math.cos(state.yaw),
                       y=state.y + self.mount_offset * math.sin(state.yaw))

    def pixel_offsets(self):
        """Per-pixel (forward, right) floor offsets at unit altitude."""
        return _pixel_offsets(self)

    def project(self, state: MavState, px: float, py: float) -> Tuple[float, float]:
        """Continuous image coordinates of a floor point."""
        state = self.lens_state(state)
        dx, dy = px - state.x, py - state.y
        c, s = math.cos(state.yaw), math.sin(state.yaw)
        forward = dx * c + dy * s
        right = -dx * s + dy * c
        f = self.focal_px
        return (self.image_width / 2 + right * f / state.z,
                self.image_height / 2 - forward * f / state.z)


@functools.lru_cache(maxsize=8)
def _pixel_offsets(cam: CameraModel):
    f = cam.focal_px
    u = (np.arange(cam.image_width) + 0.5 - cam.image_width / 2) / f
    v = (np.arange(cam.image_height) + 0.5 - cam.image_height / 2) / f
    shape = (cam.image_height, cam.image_width)
    forward = np.broadcast_to(-v[:, None], shape)
    right = np.broadcast_to(u[None, :], shape)
    return forward, right


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    duration_max: float = 900.0
    velocity_time_constant: float = 0.3
    pixel_noise_sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise WorldError("dt must be positive")
        if self.velocity_time_constant < 0:
            raise WorldError("velocity_time_constant must be >= 0")
        if self.pixel_noise_sigma < 0 or self.duration_max <= 0:
            raise WorldError("noise sigma must be >= 0 and duration_max > 0")


def step_dynamics(state: MavState, sp: VelocitySetpoint, cfg: SimConfig) -> MavState:
    """First-order velocity lag followed by an Euler position step."""
    dt, tau = cfg.dt, cfg.velocity_time_constant
    k = 1.0 if tau == 0 else min(1.0, dt / tau)
    vx = state.vx_body + k * (sp.vx_body - state.vx_body)
    wz = state.yaw_rate + k * (sp.yaw_rate - state.yaw_rate)
    vz = state.vz + k * (sp.vz - state.vz)
    return MavState(
        x=state.x + vx * math.cos(state.yaw) * dt,
        y=state.y + vx * math.sin(state.yaw) * dt,
        z=max(0.0, state.z + vz * dt),
        yaw=wrap_angle(state.yaw + wz * dt),
        vx_body=vx,
        yaw_rate=wz,
        vz=vz,
    )


class RenderError(ValueError):
    pass


_BLOCK = 16


def _floor_points(state: MavState, forward, right):
    c, s = math.cos(state.yaw), math.sin(state.yaw)
    fx = state.z * forward
    ry = state.z * right
    return state.x + fx * c - ry * s, state.y + fx * s + ry * c


def line_pixels(world: WorldSpec, state: MavState, cam: CameraModel) -> np.ndarray:
    """Boolean image of pixels whose floor point lies on the painted line.

    Distances are first evaluated at the centres of 16x16 pixel blocks;
    since distance is 1-Lipschitz, blocks farther than half the line width
    plus the block radius are skipped and only the remaining pixels get the
    exact per-pixel test.
    """
    if state.z <= 0.01:
        raise RenderError(f"altitude {state.z:.4f} m too low for a floor projection")
    state = cam.lens_state(state)
    forward, right = cam.pixel_offsets()
    h, w = forward.shape
    half = world.line_width / 2
    reach = state.z * math.hypot(w, h) / (2 * cam.focal_px)
    near = [el for el in world.path
            if float(el.distance(np.float64(state.x), np.float64(state.y))) <= reach + half]
    hit = np.zeros((h, w), dtype=bool)
    if not near:
        return hit

    nby, nbx = -(-h // _BLOCK), -(-w // _BLOCK)
    f = cam.focal_px
    bu = (np.arange(nbx) * _BLOCK + _BLOCK / 2 - w / 2) / f
    bv = (np.arange(nby) * _BLOCK + _BLOCK / 2 - h / 2) / f
    bx, by = _floor_points(state, -bv[:, None], bu[None, :])
    block_radius = state.z * _BLOCK * math.sqrt(0.5) / f
    dist = np.full((nby, nbx), np.inf)
    for el in near:
        dist = np.minimum(dist, el.distance(bx, by))
    cand = dist <= half + block_radius + 1e-9
    if not cand.any():
        return hit

    pix = np.zeros((nby * _BLOCK, nbx * _BLOCK), dtype=bool)
    pix[:, :] = np.repeat(np.repeat(cand, _BLOCK, axis=0), _BLOCK, axis=1)
    rows, cols = np.nonzero(pix[:h, :w])
    px, py = _floor_points(state, forward[rows, cols], right[rows, cols])
    d = np.full(rows.shape, np.inf)
    for el in near:
        d = np.minimum(d, el.distance(px, py))
    hit[rows, cols] = d <= half
    return hit


def render_camera(world: WorldSpec, state: MavState, cam: CameraModel = CameraModel(),
                  noise_sigma: float = 0.0, noise_seed=None) -> np.ndarray:
    hit = line_pixels(world, state, cam)
    palette = np.array([world.floor_color, world.line_color], dtype=np.uint8)
    img = palette[hit.view(np.uint8)]
    if noise_sigma > 0:
        noise = np.random.default_rng(noise_seed).normal(0.0, noise_sigma, img.shape)
        img = np.clip(np.rint(img + noise), 0, 255).astype(np.uint8)
    return img


def cross_track_error(position: Sequence[float], world: WorldSpec) -> float:
    return float(world.distance(position[0], position[1]))


class PathProgress:
    """Arc length travelled along the path, never decreasing.

    The vehicle's position is matched to the nearest path sample inside a
    window around the best progress so far, so that a closed path's start
    and end do not alias.
    """

    def __init__(self, world: WorldSpec, spacing: float = 0.01,
                 back: float = 0.5, ahead: float = 1.0):
        self.world = world
        self.points, self.s = world.sample(spacing)
        self.back, self.ahead = back, ahead
        self.best = 0.0
        self.completed = False

    @property
    def fraction(self) -> float:
        return min(1.0, self.best / self.world.length)

    def update(self, x: float, y: float) -> float:
        if self.completed:
            return self.fraction
        lo = np.searchsorted(self.s, self.best - self.back, side="left")
        hi = np.searchsorted(self.s, self.best + self.ahead, side="right")
        pts = self.points[lo:hi]
        d = np.hypot(pts[:, 0] - x, pts[:, 1] - y)
        self.best = max(self.best, float(self.s[lo + int(np.argmin(d))]))
        end = self.world.end_point
        if (self.best >= 0.9 * self.world.length
                and math.hypot(x - end[0], y - end[1]) <= self.world.line_width):
            self.completed = True
            self.best = self.world.length
        return self.fraction


# --- world files ----------------------------------------------------------
#
#   [world]
#   line_width = 0.15
#   line_color = 255, 255, 0
#   floor_color = 128, 128, 128
#   bounds = 0, 0, 8, 6
#
#   [path.segment]
#   start = 1, 1
#   end = 4.5, 1
#
#   [path.arc]
#   center = 4, 2.1
#   radius = 3
#   start_angle = 90       # degrees
#   end_angle = 36.87
#   direction = -1
#
# Path sections are read in file order.

_SECTION = re.compile(r"^\[([a-z.]+)\]$")


def _floats(text: str, n: int, key: str) -> Tuple[float, ...]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != n:
        raise WorldError(f"{key}: expected {n} comma-separated numbers, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise WorldError(f"{key}: {exc}") from None


def parse_world(text: str, name: str = "custom") -> WorldSpec:
    sections: List[Tuple[str, dict, int]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            sections.append((m.group(1), {}, lineno))
            continue
        if "=" not in line or not sections:
            raise WorldError(f"line {lineno}: expected 'key = value' inside a section")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in sections[-1][1]:
            raise WorldError(f"line {lineno}: duplicate key {key!r}")
        sections[-1][1][key] = value

    world_kw = {}
    path: List[PathElement] = []
    allowed = {
        "world": {"line_width", "line_color", "floor_color", "bounds"},
        "path.segment": {"start", "end"},
        "path.arc": {"center", "radius", "start_angle", "end_angle", "direction"},
    }
    for sec, kv, lineno in sections:
        if sec not in allowed:
            raise WorldError(f"line {lineno}: unknown section [{sec}]")
        unknown = set(kv) - allowed[sec]
        if unknown:
            raise WorldError(f"line {lineno}: unknown keys in [{sec}]: {sorted(unknown)}")
        if sec == "world":
            if "line_width" in kv:
                world_kw["line_width"] = float(kv["line_width"])
            for key in ("line_color", "floor_color"):
                if key in kv:
                    world_kw[key] = tuple(int(c) for c in _floats(kv[key], 3, key))
            if "bounds" in kv:
                world_kw["bounds"] = _floats(kv["bounds"], 4, "bounds")
            continue
        missing = allowed[sec] - set(kv)
        if missing:
            raise WorldError(f"line {lineno}: [{sec}] missing {sorted(missing)}")
        if sec == "path.segment":
            path.append(Segment(_floats(kv["start"], 2, "start"), _floats(kv["end"], 2, "end")))
        else:
            path.append(Arc(
                center=_floats(kv["center"], 2, "center"),
                radius=float(kv["radius"]),
                start_angle=math.radians(float(kv["start_angle"])),
                end_angle=math.radians(float(kv["end_angle"])),
                direction=int(kv["direction"]),
            ))
    return WorldSpec(path=tuple(path), name=name, **world_kw)


def load_world(path: Union[str, Path]) -> WorldSpec:
    path = Path(path)
    return parse_world(path.read_text(), name=path.stem)


def format_world(world: WorldSpec) -> str:
    def nums(vals):
        return ", ".join(repr(float(v)) for v in vals)

    lines = [
        "[world]",
        f"line_width = {world.line_width!r}",
        "line_color = " + ", ".join(str(int(c)) for c in world.line_color),
        "floor_color = " + ", ".join(str(int(c)) for c in world.floor_color),
        f"bounds = {nums(world.bounds)}",
    ]
    for el in world.path:
        lines.append("")
        if isinstance(el, Segment):
            lines += ["[path.segment]", f"start = {nums(el.start)}", f"end = {nums(el.end)}"]
        else:
            lines += [
                "[path.arc]",
                f"center = {nums(el.center)}",
                f"radius = {el.radius!r}",
                f"start_angle = {math.degrees(el.start_angle)!r}",
                f"end_angle = {math.degrees(el.end_angle)!r}",
                f"direction = {el.direction}",
            ]
    return "\n".join(lines) + "\n"


def initial_state(world: WorldSpec, altitude: float = 0.0) -> MavState:
    x, y = world.start_point
    return MavState(x=x, y=y, z=altitude, yaw=world.start_heading())
