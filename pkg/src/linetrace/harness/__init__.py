"""Run configuration, closed-loop executor, metrics, exporters and CLI."""

from .config import ConfigError, OutputConfig, RunConfig, format_config, load_config, parse_config, resolve_seed
from .exporters import export_csv, export_plots, format_csv, metrics_json, parse_csv, read_csv
from .metrics import Metrics, MetricsError, compute_metrics
from .runner import FrameRecord, RunLog, RunStatus, run_simulation

__all__ = [
    "ConfigError", "OutputConfig", "RunConfig", "format_config", "load_config", "parse_config",
    "resolve_seed", "export_csv", "export_plots", "format_csv", "metrics_json", "parse_csv", "read_csv",
    "Metrics", "MetricsError", "compute_metrics", "FrameRecord", "RunLog", "RunStatus",
    "run_simulation",
]
