"""Run configuration: dataclass plus a flat ``section.key = value`` text format.

Every key has a default (see ``DEFAULT_CONFIG_TEXT`` or ``format_config``);
a file only needs the keys it changes. Unknown keys are errors. ``#`` starts
a comment. Tuples are comma separated.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Union

from ..detection import CannyParams, DetectionConfig, HoughParams
from ..imaging import HsvRange, StructuringElement
from ..navigation import NavConfig
from ..simworld import CameraModel, SimConfig, WorldError, WorldSpec, build_environment, load_world
from ..tracking import TrackerConfig

BUILTIN_WORLDS = ("env1", "env2")
SEED_ENV = "LINETRACE_SEED"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "linetrace_out"
    frame_stride: int = 0  # 0 disables frame dumps
    plots: bool = True
    timing: bool = False  # wall-clock detection time makes logs irreproducible

    def __post_init__(self):
        if self.frame_stride < 0:
            raise ConfigError("output.frame_stride must be >= 0")


@dataclass(frozen=True)
class RunConfig:
    world: str = "env1"
    detection: DetectionConfig = DetectionConfig()
    tracker: TrackerConfig = TrackerConfig()
    nav: NavConfig = NavConfig()
    sim: SimConfig = SimConfig()
    camera: CameraModel = CameraModel()
    takeoff_tolerance: float = 0.02
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self):
        if self.tracker.dt != self.sim.dt:
            raise ConfigError("tracker.dt must equal sim.dt (one filter step per frame)")
        if self.takeoff_tolerance <= 0:
            raise ConfigError("takeoff.tolerance must be > 0")

    def load_world(self) -> WorldSpec:
        if self.world in BUILTIN_WORLDS:
            return build_environment(self.world)
        try:
            return load_world(self.world)
        except OSError as exc:
            raise ConfigError(f"cannot read world file {self.world!r}: {exc}") from exc


def flatten(cfg: RunConfig) -> Dict[str, object]:
    det, trk, cam, out = cfg.detection, cfg.tracker, cfg.camera, cfg.output
    flat: Dict[str, object] = {
        "world.source": cfg.world,
        "detection.hsv_lower": det.hsv_range.lower.as_tuple(),
        "detection.hsv_upper": det.hsv_range.upper.as_tuple(),
        "detection.kernel_half_width": det.morphology.half_width,
        "detection.canny_low": det.canny.low_threshold,
        "detection.canny_high": det.canny.high_threshold,
        "detection.blur_sigma": det.canny.blur_sigma,
        "detection.hough_rho": det.hough.rho_resolution,
        "detection.hough_theta_deg": round(math.degrees(det.hough.theta_resolution), 10),
        "detection.hough_threshold": det.hough.vote_threshold,
        "detection.hough_min_length": det.hough.min_line_length,
        "detection.hough_max_gap": det.hough.max_line_gap,
        "tracker.q": trk.q,
        "tracker.r": tuple(trk.r),
        "tracker.p0_pos": trk.p0_pos,
        "tracker.p0_vel": trk.p0_vel,
        "tracker.max_coast": trk.max_coast,
    }
    for f in dataclasses.fields(NavConfig):
        flat[f"nav.{f.name}"] = getattr(cfg.nav, f.name)
    for f in dataclasses.fields(SimConfig):
        flat[f"sim.{f.name}"] = getattr(cfg.sim, f.name)
    flat.update({
        "camera.image_width": cam.image_width,
        "camera.image_height": cam.image_height,
        "camera.vertical_fov_deg": round(math.degrees(cam.vertical_fov), 10),
        "camera.mount_offset": cam.mount_offset,
        "takeoff.tolerance": cfg.takeoff_tolerance,
        "output.directory": out.directory,
        "output.frame_stride": out.frame_stride,
        "output.plots": out.plots,
        "output.timing": out.timing,
    })
    return flat


def unflatten(flat: Dict[str, object]) -> RunConfig:
    g = flat.__getitem__
    det = DetectionConfig(
        hsv_range=HsvRange.from_tuples(g("detection.hsv_lower"), g("detection.hsv_upper")),
        morphology=StructuringElement(g("detection.kernel_half_width")),
        canny=CannyParams(g("detection.canny_low"), g("detection.canny_high"),
                          g("detection.blur_sigma")),
        hough=HoughParams(g("detection.hough_rho"), math.radians(g("detection.hough_theta_deg")),
                          g("detection.hough_threshold"), g("detection.hough_min_length"),
                          g("detection.hough_max_gap")),
    )
    sim = SimConfig(**{f.name: g(f"sim.{f.name}") for f in dataclasses.fields(SimConfig)})
    tracker = TrackerConfig(dt=sim.dt, q=g("tracker.q"), r=g("tracker.r"),
                            p0_pos=g("tracker.p0_pos"), p0_vel=g("tracker.p0_vel"),
                            max_coast=g("tracker.max_coast"))
    nav = NavConfig(**{f.name: g(f"nav.{f.name}") for f in dataclasses.fields(NavConfig)})
    cam = CameraModel(g("camera.image_width"), g("camera.image_height"),
                      math.radians(g("camera.vertical_fov_deg")), g("camera.mount_offset"))
    out = OutputConfig(g("output.directory"), g("output.frame_stride"),
                       g("output.plots"), g("output.timing"))
    return RunConfig(world=g("world.source"), detection=det, tracker=tracker, nav=nav,
                     sim=sim, camera=cam, takeoff_tolerance=g("takeoff.tolerance"), output=out)


_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _convert(raw: str, like: object, key: str) -> object:
    try:
        if isinstance(like, bool):
            low = raw.lower()
            if low in _TRUE or low in _FALSE:
                return low in _TRUE
            raise ValueError(raw)
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
        if isinstance(like, tuple):
            parts = [p.strip() for p in raw.split(",")]
            if len(parts) != len(like):
                raise ValueError(f"expected {len(like)} values")
            return tuple(_convert(p, like[0], key) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})") from None
    return raw


def parse_config(text: str, base_dir: Union[str, Path, None] = None) -> RunConfig:
    """Parse config text; relative world paths resolve against ``base_dir``."""
    flat = flatten(RunConfig())
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        if key not in flat:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        flat[key] = _convert(raw, flat[key], key)

    src = str(flat["world.source"])
    if src not in BUILTIN_WORLDS:
        path = Path(src)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        if not path.is_file():
            raise ConfigError(f"world file not found: {path}")
        flat["world.source"] = str(path)
    try:
        return unflatten(flat)
    except (ValueError, WorldError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, base_dir=path.parent)


def _fmt(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(cfg: RunConfig) -> str:
    lines = []
    section = None
    for key, value in flatten(cfg).items():
        head = key.split(".", 1)[0]
        if head != section:
            if section is not None:
                lines.append("")
            section = head
        lines.append(f"{key} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


DEFAULT_CONFIG_TEXT = format_config(RunConfig())


def resolve_seed(cfg: RunConfig, seed: Optional[int] = None,
                 environ: Optional[Dict[str, str]] = None) -> RunConfig:
    """Apply the seed override chain: explicit seed > $LINETRACE_SEED > file."""
    environ = os.environ if environ is None else environ
    if seed is None and environ.get(SEED_ENV, "").strip():
        try:
            seed = int(environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {environ[SEED_ENV]!r}") from None
    if seed is None:
        return cfg
    return dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, rng_seed=seed))
