"""Run metrics: FPS, cruise altitude, cross-track error, completion and
raw-vs-filtered centroid increment variances."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional

import numpy as np

from ..simworld import PathProgress, WorldSpec
from .runner import CRUISE, RunLog


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class Metrics:
    fps_mean: Optional[float]
    fps_max: Optional[float]
    fps_min: Optional[float]
    altitude_mean: float
    altitude_min: float
    altitude_max: float
    cross_track_mean: Optional[float]
    cross_track_max: Optional[float]
    completion: Optional[float]
    raw_increment_var: Optional[float]
    filtered_increment_var: Optional[float]

    def as_dict(self) -> Dict[str, Optional[float]]:
        return asdict(self)


def _stats(values):
    if len(values) == 0:
        return None, None, None
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.max()), float(arr.min())


def increment_variances(log: RunLog):
    """Variances of frame-to-frame cx increments, raw and filtered.

    Only frames carrying a raw centroid take part; increments are taken
    between consecutive such frames.
    """
    rows = [r for r in log.records if r.raw_cx is not None and r.kf_cx is not None]
    if len(rows) < 3:
        return None, None
    raw = np.diff([r.raw_cx for r in rows])
    filt = np.diff([r.kf_cx for r in rows])
    return float(np.var(raw)), float(np.var(filt))


def compute_metrics(log: RunLog, world: Optional[WorldSpec] = None) -> Metrics:
    """Summarise a run; world-dependent fields are None when ``world`` is None."""
    if not log.records:
        raise MetricsError("empty run log")
    cruise = [r for r in log.records if r.phase == CRUISE]
    if not cruise:
        raise MetricsError("run log has no cruise phase (takeoff never completed)")

    times = [r.detect_time for r in cruise if r.detect_time is not None]
    fps = [1.0 / t if t > 0 else math.inf for t in times]
    fps_mean, fps_max, fps_min = _stats(fps)

    alt = np.array([r.z for r in cruise])

    ct_mean = ct_max = completion = None
    if world is not None:
        ct = np.asarray(world.distance(np.array([r.x for r in cruise]),
                                       np.array([r.y for r in cruise])), dtype=float)
        ct_mean, ct_max = float(ct.mean()), float(ct.max())
        # same replay the runner performs, so completion matches its verdict
        progress = PathProgress(world)
        for r in log.records:
            progress.update(r.x, r.y)
        completion = progress.fraction

    raw_var, filt_var = increment_variances(log)
    return Metrics(fps_mean, fps_max, fps_min,
                   float(alt.mean()), float(alt.min()), float(alt.max()),
                   ct_mean, ct_max, completion, raw_var, filt_var)
