"""CSV run logs and SVG evaluation plots."""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

from ..simworld import WorldSpec
from .runner import FrameRecord, RunLog

CSV_COLUMNS = [f.name for f in dataclasses.fields(FrameRecord)]
_FLOAT_COLUMNS = {"t", "x", "y", "z", "yaw", "raw_cx", "raw_cy", "kf_cx", "kf_cy",
                  "vx", "yaw_rate", "vz", "detect_time"}

PathLike = Union[str, Path]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        text = format(value, ".6g")
        return "0" if text == "-0" else text
    return str(value)


def format_csv(log: RunLog) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for rec in log.records:
        lines.append(",".join(_cell(getattr(rec, c)) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def export_csv(log: RunLog, path: PathLike) -> Path:
    path = Path(path)
    # newline="" keeps "\n" on every platform
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(format_csv(log))
    return path


def _parse_cell(name: str, text: str):
    if text == "":
        return None
    if name == "frame":
        return int(text)
    if name == "valid":
        return text == "1"
    if name in _FLOAT_COLUMNS:
        return float(text)
    return text


def parse_csv(text: str, dt: Optional[float] = None) -> RunLog:
    lines = text.splitlines()
    if not lines or lines[0].split(",") != CSV_COLUMNS:
        raise ValueError("not a run log: header does not match")
    records = []
    for lineno, line in enumerate(lines[1:], 2):
        cells = line.split(",")
        if len(cells) != len(CSV_COLUMNS):
            raise ValueError(f"line {lineno}: expected {len(CSV_COLUMNS)} cells, got {len(cells)}")
        records.append(FrameRecord(**{c: _parse_cell(c, v) for c, v in zip(CSV_COLUMNS, cells)}))
    if dt is None:
        dt = records[1].t - records[0].t if len(records) > 1 else 0.1
    return RunLog(records=records, status=None, dt=dt)


def read_csv(path: PathLike) -> RunLog:
    return parse_csv(Path(path).read_text(encoding="ascii"))


def metrics_json(metrics) -> str:
    def clean(v):
        return None if v is None or (isinstance(v, float) and not math.isfinite(v)) else v
    return json.dumps({k: clean(v) for k, v in metrics.as_dict().items()}, indent=2, sort_keys=True) + "\n"


# --- plots -----------------------------------------------------------------

def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "linetrace"  # stable element ids
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def _column(log: RunLog, name: str) -> np.ndarray:
    return np.array([np.nan if getattr(r, name) is None else getattr(r, name)
                     for r in log.records], dtype=float)


def _save(fig, path: Path, plt) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def export_plots(log: RunLog, world: WorldSpec, directory: PathLike) -> Dict[str, Path]:
    """Write trajectory, altitude, heading/speed and centroid plots as SVG."""
    plt = _pyplot()
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    t = _column(log, "t")
    files: Dict[str, Path] = {}

    fig, ax = plt.subplots(figsize=(6, 5))
    path_xy, _ = world.sample(0.01)
    ax.plot(path_xy[:, 0], path_xy[:, 1], color="goldenrod", lw=3, label="path")
    if len(log.records):
        ax.plot(_column(log, "x"), _column(log, "y"), color="tab:blue", lw=1, label="trajectory")
    ax.set_aspect("equal")
    ax.invert_yaxis()  # +y is to the right of +x heading; keep turns visually correct
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.legend(loc="best")
    files["trajectory"] = _save(fig, out / "trajectory.svg", plt)

    fig, ax = plt.subplots(figsize=(6, 3))
    ax.plot(t, _column(log, "z"), color="tab:green")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("altitude [m]")
    files["altitude"] = _save(fig, out / "altitude.svg", plt)

    fig, ax = plt.subplots(figsize=(6, 3))
    ax.plot(t, np.degrees(_column(log, "yaw")), color="tab:red", lw=1)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("heading [deg]", color="tab:red")
    ax2 = ax.twinx()
    ax2.plot(t, _column(log, "vx"), color="tab:blue", lw=1)
    ax2.set_ylabel("forward speed [m/s]", color="tab:blue")
    files["heading_speed"] = _save(fig, out / "heading_speed.svg", plt)

    fig, ax = plt.subplots(figsize=(6, 3))
    for name, style in (("raw_cx", dict(color="0.6", lw=0.8, label="raw cx")),
                        ("kf_cx", dict(color="tab:purple", lw=1.2, label="filtered cx"))):
        series = _column(log, name)
        if np.isfinite(series).any():
            ax.plot(t, series, **style)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("centroid x [px]")
    if ax.lines:
        ax.legend(loc="best")
    files["centroid"] = _save(fig, out / "centroid.svg", plt)
    return files
