"""Utility modules for the detector."""
from .config import (
    AnchorConfig,
    DatasetSpec,
    DetectConfig,
    EvalConfig,
    PathsConfig,
    PyramidConfig,
    RunConfig,
    TrainConfig,
    load_run_config,
    write_run_config,
)
from .helpers import build_sample_id, format_number, parse_list
from .log import configure_logging

__all__ = [
    "AnchorConfig",
    "DatasetSpec",
    "DetectConfig",
    "EvalConfig",
    "PathsConfig",
    "PyramidConfig",
    "RunConfig",
    "TrainConfig",
    "load_run_config",
    "write_run_config",
    "build_sample_id",
    "format_number",
    "parse_list",
    "configure_logging",
]
