"""Runtime monitor for perceived object lists: LiDAR grid checks and motion plausibility checks."""
from .exceptions import ConfigError, DegenerateGeometry, FrameMismatch, MissingHistory, MonitorError, ZeroInterval
from .grid import GridConfig, OccupancyGrid, build_grid, cells_in_region
from .plausibility import (PlausibilityParams, PlausibilityVerdict, check_plausibility, check_stream,
                           ctra_displacement, estimate_rates, min_detectable_speed_error, predict_position)
from .sensor import (SensorCheckParams, SensorVerdict, check_frame, conflict_map, consistency,
                     min_detectable_position_error)
from .types import EgoPose, ErrorKind, InjectedError, ObjectState, PointCloud2D, normalize_angle, velocity_to_polar

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DegenerateGeometry", "FrameMismatch", "MissingHistory", "MonitorError", "ZeroInterval",
    "GridConfig", "OccupancyGrid", "build_grid", "cells_in_region",
    "PlausibilityParams", "PlausibilityVerdict", "check_plausibility", "check_stream", "ctra_displacement",
    "estimate_rates", "min_detectable_speed_error", "predict_position",
    "SensorCheckParams", "SensorVerdict", "check_frame", "conflict_map", "consistency",
    "min_detectable_position_error",
    "EgoPose", "ErrorKind", "InjectedError", "ObjectState", "PointCloud2D", "normalize_angle", "velocity_to_polar",
]
