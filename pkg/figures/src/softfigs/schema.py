"""CSV contract shared with the simulator's command line.

The simulator writes comma separated tables with fixed headers.  The
figure scripts re-declare those headers here instead of importing the
simulator, so the files on disk are the whole interface: a run produced
by any build of the simulator renders the same way, and any drift in
the format surfaces as a loud :class:`SchemaError` instead of a wrong
plot.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

EVENT_COLUMNS = ("n", "t", "tau", "kind", "xdot_pre", "xdot_post", "y", "ydot", "E")
TRAJECTORY_COLUMNS = ("t", "x", "xdot", "y", "ydot", "E")
SWEEP_COLUMNS = ("epsilon", "impacts", "norm")

# The event log's classification column is text; everything else is numeric.
TEXT_COLUMNS = frozenset({"kind"})

_SCHEMA_NAMES = {
    EVENT_COLUMNS: "event log",
    TRAJECTORY_COLUMNS: "sampled trajectory",
    SWEEP_COLUMNS: "launch-speed sweep",
}


class SchemaError(Exception):
    """An input table does not match the simulator's CSV contract."""


def schema_name(columns: tuple[str, ...]) -> str:
    """Human name of one of the known column tuples."""
    return _SCHEMA_NAMES[columns]


def _header_mismatch(path: Path, got: tuple[str, ...], expected: tuple[str, ...]) -> SchemaError:
    missing = [c for c in expected if c not in got]
    extra = [c for c in got if c not in expected]
    parts = []
    if missing:
        parts.append(f"missing columns: {', '.join(missing)}")
    if extra:
        parts.append(f"unexpected columns: {', '.join(extra)}")
    if not parts:
        parts.append("columns are out of order")
    return SchemaError(
        f"{path}: header mismatch for a {_SCHEMA_NAMES[expected]} table "
        f"({'; '.join(parts)}); expected {','.join(expected)}, got {','.join(got)}"
    )


def read_table(path, columns: tuple[str, ...]) -> dict[str, np.ndarray | list[str]]:
    """Load one CSV into a column mapping, refusing any contract drift.

    Numeric columns come back as float arrays, text columns as string
    lists.  A table with a valid header and no rows is legal and yields
    empty columns.  Raises :class:`SchemaError` on a missing file, a
    header that is not exactly ``columns``, a short or long row, or a
    cell that does not parse as a finite number.
    """
    p = Path(path)
    if not p.is_file():
        raise SchemaError(f"missing input file: {p}")
    with open(p, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{p}: empty file, expected header {','.join(columns)}")
    got = tuple(rows[0])
    if got != columns:
        raise _header_mismatch(p, got, columns)
    cells: dict[str, list] = {name: [] for name in columns}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(columns):
            raise SchemaError(
                f"{p}: line {lineno}: expected {len(columns)} cells, got {len(row)}"
            )
        for name, cell in zip(columns, row):
            if name in TEXT_COLUMNS:
                cells[name].append(cell)
                continue
            try:
                value = float(cell)
            except ValueError:
                raise SchemaError(
                    f"{p}: line {lineno}: column {name!r}: "
                    f"not a number: {cell!r}"
                ) from None
            if not math.isfinite(value):
                raise SchemaError(
                    f"{p}: line {lineno}: column {name!r}: "
                    f"non-finite value: {cell!r}"
                )
            cells[name].append(value)
    return {
        name: values if name in TEXT_COLUMNS else np.asarray(values, dtype=float)
        for name, values in cells.items()
    }


def sniff_schema(path) -> tuple[str, ...]:
    """Identify which table a file holds from its header line alone.

    Returns the matching column tuple.  Raises :class:`SchemaError` for
    a missing or empty file, or a header that matches no known table.
    """
    p = Path(path)
    if not p.is_file():
        raise SchemaError(f"missing input file: {p}")
    with open(p, "r", encoding="utf-8") as fh:
        first = fh.readline()
    if not first:
        raise SchemaError(f"{p}: empty file")
    got = tuple(first.rstrip("\r\n").split(","))
    for columns in _SCHEMA_NAMES:
        if got == columns:
            return columns
    known = " | ".join(",".join(c) for c in _SCHEMA_NAMES)
    raise SchemaError(
        f"{p}: header {','.join(got)} matches no known table; expected one of: {known}"
    )
