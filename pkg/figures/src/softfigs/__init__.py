"""Static figures over the deformable bouncing ball simulator's CSV logs.

This package talks to the simulator only through the files it writes:
the CSV tables declared in :mod:`softfigs.schema`.  :mod:`softfigs.figures`
turns them into matplotlib figures, and :mod:`softfigs.cli` wraps that in
a one-figure-per-invocation command line.
"""

from .figures import FORMATS, KINDS, FigureError, FigureSpec, build_figure, render
from .schema import (
    EVENT_COLUMNS,
    SWEEP_COLUMNS,
    TRAJECTORY_COLUMNS,
    SchemaError,
    read_table,
    schema_name,
    sniff_schema,
)

__version__ = "0.1.0"

__all__ = [
    "EVENT_COLUMNS",
    "FORMATS",
    "FigureError",
    "FigureSpec",
    "KINDS",
    "SWEEP_COLUMNS",
    "SchemaError",
    "TRAJECTORY_COLUMNS",
    "build_figure",
    "read_table",
    "render",
    "schema_name",
    "sniff_schema",
    "__version__",
]
