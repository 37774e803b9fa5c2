"""Command line entry point.

    linetrace run --config run.cfg [--seed N] [--out DIR] [--timing]
    linetrace detect --image frame.ppm [--config run.cfg] [--out DIR]
    linetrace world emit --env env1|env2 [--out FILE]
    linetrace config emit
    linetrace metrics --log run.csv [--world env1|env2|FILE]

Exit status: 0 on success, 1 when a run or detection fails, 2 for usage
errors, missing files and invalid configuration.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from ..detection import detect_line
from ..simworld import WorldError, build_environment, format_world, load_world
from .config import BUILTIN_WORLDS, DEFAULT_CONFIG_TEXT, ConfigError, RunConfig, load_config, resolve_seed
from .exporters import export_csv, export_plots, metrics_json, read_csv
from .images import ImageFormatError, draw_centroid, draw_segments, mask_to_rgb, read_ppm, write_pbm, write_ppm
from .metrics import MetricsError, compute_metrics
from .runner import RunStatus, run_simulation

USAGE_ERROR = 2


class CliError(Exception):
    def __init__(self, message: str, status: int = 1):
        super().__init__(message)
        self.status = status


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linetrace",
                                     description="Vision-based line following in a synthetic world.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="closed-loop simulation")
    run.add_argument("--config", required=True, help="run configuration file")
    run.add_argument("--seed", type=int, help="overrides sim.rng_seed and $LINETRACE_SEED")
    run.add_argument("--out", help="output directory (overrides output.directory)")
    run.add_argument("--timing", action="store_true",
                     help="record detection wall time (FPS metrics; logs stop being reproducible)")

    det = sub.add_parser("detect", help="run the detection pipeline on one PPM frame")
    det.add_argument("--image", required=True, help="binary PPM (P6) frame")
    det.add_argument("--config", help="run configuration file (detection.* keys are used)")
    det.add_argument("--out", default=".", help="directory for mask/edges/overlay images")
    det.add_argument("--seed", type=int, default=0, help="Hough sampling seed")

    world = sub.add_parser("world", help="world file utilities")
    wsub = world.add_subparsers(dest="world_command", required=True)
    emit = wsub.add_parser("emit", help="print a built-in environment as a world file")
    emit.add_argument("--env", required=True, choices=BUILTIN_WORLDS)
    emit.add_argument("--out", help="write to this file instead of stdout")

    cfg = sub.add_parser("config", help="configuration utilities")
    csub = cfg.add_subparsers(dest="config_command", required=True)
    csub.add_parser("emit", help="print the default configuration")

    met = sub.add_parser("metrics", help="metrics of a logged run")
    met.add_argument("--log", required=True, help="run CSV written by 'run'")
    met.add_argument("--world", help="env1, env2 or a world file; enables cross-track and completion")
    return parser


def _load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        return load_config(path)
    except FileNotFoundError:
        raise CliError(f"config file not found: {path}", USAGE_ERROR) from None
    except ConfigError as exc:
        raise CliError(f"invalid config {path}: {exc}", USAGE_ERROR) from None


def _cmd_run(args) -> int:
    try:
        cfg = resolve_seed(_load_config(args.config), args.seed)
    except ConfigError as exc:
        raise CliError(str(exc), USAGE_ERROR) from None
    out_cfg = cfg.output
    if args.out is not None:
        out_cfg = dataclasses.replace(out_cfg, directory=args.out)
    if args.timing:
        out_cfg = dataclasses.replace(out_cfg, timing=True)
    cfg = dataclasses.replace(cfg, output=out_cfg)
    out = Path(out_cfg.directory)
    out.mkdir(parents=True, exist_ok=True)
    world = cfg.load_world()

    hook = None
    if out_cfg.frame_stride > 0:
        frames = out / "frames"
        frames.mkdir(exist_ok=True)

        def hook(k, frame, result):
            if k % out_cfg.frame_stride == 0:
                write_ppm(frames / f"frame_{k:05d}.ppm", frame)
                write_pbm(frames / f"mask_{k:05d}.pbm", result.mask)

    log = run_simulation(cfg, world, frame_hook=hook)
    export_csv(log, out / "run.csv")
    print(f"status: {log.status.value}  frames: {len(log)}")
    if log.status is RunStatus.ERROR:
        raise CliError(log.message)
    try:
        metrics = compute_metrics(log, world)
    except MetricsError as exc:
        raise CliError(f"no metrics: {exc}") from None
    (out / "metrics.json").write_text(metrics_json(metrics))
    if out_cfg.plots:
        export_plots(log, world, out)
    print(metrics_json(metrics), end="")
    return 0


def _cmd_detect(args) -> int:
    cfg = _load_config(args.config)
    try:
        frame = read_ppm(args.image)
    except FileNotFoundError:
        raise CliError(f"image not found: {args.image}", USAGE_ERROR) from None
    except (ImageFormatError, ValueError) as exc:
        raise CliError(f"cannot read {args.image}: {exc}") from None
    result = detect_line(frame, cfg.detection, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_pbm(out / "mask.pbm", result.mask)
    write_pbm(out / "edges.pbm", result.edges)
    overlay = draw_segments(frame, result.segments)
    if result.centroid is not None:
        overlay = draw_centroid(overlay, result.centroid)
    write_ppm(out / "segments.ppm", overlay)
    edges_overlay = draw_segments(mask_to_rgb(result.edges), result.segments)
    write_ppm(out / "edges_segments.ppm", edges_overlay)
    summary = {
        "segments": [dataclasses.astuple(s) for s in result.segments],
        "centroid": None if result.centroid is None else [result.centroid.cx, result.centroid.cy],
    }
    print(json.dumps(summary))
    return 0


def _world_arg(value: str):
    if value in BUILTIN_WORLDS:
        return build_environment(value)
    try:
        return load_world(value)
    except FileNotFoundError:
        raise CliError(f"world file not found: {value}", USAGE_ERROR) from None
    except WorldError as exc:
        raise CliError(f"invalid world file {value}: {exc}", USAGE_ERROR) from None


def _cmd_world(args) -> int:
    text = format_world(build_environment(args.env))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_metrics(args) -> int:
    try:
        log = read_csv(args.log)
    except FileNotFoundError:
        raise CliError(f"log not found: {args.log}", USAGE_ERROR) from None
    except ValueError as exc:
        raise CliError(f"cannot read {args.log}: {exc}") from None
    world = _world_arg(args.world) if args.world else None
    try:
        metrics = compute_metrics(log, world)
    except MetricsError as exc:
        raise CliError(str(exc)) from None
    sys.stdout.write(metrics_json(metrics))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "detect":
            return _cmd_detect(args)
        if args.command == "world":
            return _cmd_world(args)
        if args.command == "config":
            sys.stdout.write(DEFAULT_CONFIG_TEXT)
            return 0
        return _cmd_metrics(args)
    except CliError as exc:
        print(f"linetrace: error: {exc}", file=sys.stderr)
        return exc.status
    except (ConfigError, WorldError) as exc:
        print(f"linetrace: error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
