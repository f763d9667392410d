# utils/__init__.py

from .color_log import ANSI, colorize, log_check, log_verdict, log_warning
from .errors import (
    DafNumericsError,
    InvalidInputError,
    ModelViolationError,
    ConvergenceError,
    ScaleNotFoundError,
    ResolutionError,
    UsageError,
)
from .grid_utils import get_worst_cell, unit, line_angle
from .artifact_io import write_json, write_csv, leaf_arc_frame, to_jsonable
