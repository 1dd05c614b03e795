"""Figure builders over the simulator's CSV logs.

Each builder turns one or two tables into a matplotlib figure:

* ``trajectory``: both mass heights against time, with a solid dot at
  every impact instant (none when the event log is empty).
* ``restitution``: successive macroscopic flight-time ratios against
  the flight index, the flight-time estimate of the restitution
  coefficient.
* ``contact-sequence``: the post-impact state of the upper mass,
  velocity against height above equilibrium, joined in temporal order
  by thin lines.
* ``convergence``: impact count and trajectory distance of a
  launch-speed sweep against the launch speed, on log-log axes.

Rendering is a pure function of the input files and the spec: no
network, and no clock content unless the timestamp option is switched
on.  Rendering the same inputs twice yields byte-identical images.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)
import numpy as np  # noqa: E402

from .schema import (  # noqa: E402
    EVENT_COLUMNS,
    SWEEP_COLUMNS,
    TRAJECTORY_COLUMNS,
    SchemaError,
    read_table,
    schema_name,
    sniff_schema,
)

KINDS = ("trajectory", "restitution", "contact-sequence", "convergence")

# Output formats whose bytes do not depend on when they are written
# (SVG and PDF need their date metadata stripped, handled in render).
FORMATS = (".png", ".svg", ".pdf")

DOT_STYLE = {"s": 9.0, "color": "black", "zorder": 3}


class FigureError(Exception):
    """A spec that cannot be rendered: bad options or unusable data."""


@dataclass(frozen=True, slots=True)
class FigureSpec:
    """One figure request: what to read, what to draw, where to write.

    ``gamma`` is only consulted by the contact-sequence kind, which
    needs the weight to spring-force ratio to place the equilibrium
    height 1 - 2*gamma; the tables themselves do not carry it.
    """

    kind: str
    inputs: tuple[str, ...]
    out: str
    title: str | None = None
    gamma: float | None = None
    projection: str = "2d"
    timestamp: bool = False
    dpi: int = 150


def _require_inputs(spec: FigureSpec, count: int, what: str) -> None:
    if len(spec.inputs) != count:
        raise FigureError(
            f"{spec.kind} takes exactly {count} input file(s) ({what}), "
            f"got {len(spec.inputs)}"
        )


def _trajectory(spec: FigureSpec, ax) -> None:
    _require_inputs(spec, 2, "one sampled trajectory and one event log")
    by_schema = {}
    for path in spec.inputs:
        by_schema.setdefault(sniff_schema(path), []).append(path)
    if sorted(map(len, by_schema.values())) != [1, 1] or set(by_schema) != {
        TRAJECTORY_COLUMNS,
        EVENT_COLUMNS,
    }:
        raise SchemaError(
            "trajectory needs one sampled trajectory and one event log, got "
            + ", ".join(
                f"{p}: {schema_name(s)}" for s, ps in by_schema.items() for p in ps
            )
        )
    tr = read_table(by_schema[TRAJECTORY_COLUMNS][0], TRAJECTORY_COLUMNS)
    ev = read_table(by_schema[EVENT_COLUMNS][0], EVENT_COLUMNS)
    ax.plot(tr["t"], tr["y"], lw=1.0, label="upper mass")
    ax.plot(tr["t"], tr["x"], lw=1.0, label="lower mass")
    if len(ev["t"]):
        # At an impact the lower mass sits on the floor; the log carries
        # the upper mass height.
        ax.scatter(ev["t"], ev["y"], **DOT_STYLE)
        ax.scatter(ev["t"], np.zeros_like(ev["t"]), **DOT_STYLE)
    ax.set_xlabel("time")
    ax.set_ylabel("height")
    ax.legend(loc="upper right")


def _restitution(spec: FigureSpec, ax) -> None:
    _require_inputs(spec, 1, "one event log")
    ev = read_table(spec.inputs[0], EVENT_COLUMNS)
    # A bounce is a pair of floor hits separated by one internal
    # vibration, so only every second flight is macroscopic.
    flights = ev["tau"][::2]
    if len(flights) < 2:
        raise FigureError(
            f"restitution needs at least 3 logged impacts, got {len(ev['tau'])}"
        )
    if np.any(flights[:-1] == 0.0):
        raise FigureError("restitution needs nonzero flight times")
    ratios = flights[1:] / flights[:-1]
    ax.scatter(np.arange(1, len(ratios) + 1), ratios, **DOT_STYLE)
    ax.set_xlabel("macroscopic flight")
    ax.set_ylabel("flight-time ratio")


def _contact_sequence(spec: FigureSpec, ax) -> None:
    _require_inputs(spec, 1, "one event log")
    if spec.gamma is None:
        raise FigureError(
            "contact-sequence needs --gamma to place the equilibrium height"
        )
    ev = read_table(spec.inputs[0], EVENT_COLUMNS)
    height = ev["y"] - (1.0 - 2.0 * spec.gamma)
    # The thin line only makes the temporal order of the dots visible.
    if spec.projection == "3d":
        ax.plot(ev["ydot"], height, ev["xdot_post"], lw=0.3, color="gray")
        ax.scatter(ev["ydot"], height, ev["xdot_post"], **DOT_STYLE)
        ax.set_zlabel("lower mass velocity")
    else:
        ax.plot(ev["ydot"], height, lw=0.3, color="gray")
        ax.scatter(ev["ydot"], height, **DOT_STYLE)
    ax.set_xlabel("upper mass velocity")
    ax.set_ylabel("upper mass height above equilibrium")


def _convergence(spec: FigureSpec, ax) -> None:
    _require_inputs(spec, 1, "one launch-speed sweep")
    sw = read_table(spec.inputs[0], SWEEP_COLUMNS)
    if len(sw["epsilon"]) < 2:
        raise FigureError(
            f"convergence needs at least 2 sweep rows, got {len(sw['epsilon'])}"
        )
    if np.any(sw["epsilon"] <= 0) or np.any(sw["impacts"] <= 0) or np.any(sw["norm"] <= 0):
        raise FigureError("convergence needs positive epsilon, impacts, and norm")
    order = np.argsort(sw["epsilon"])
    eps = sw["epsilon"][order]
    ax.loglog(eps, sw["impacts"][order], "o-", color="tab:blue", label="impacts")
    ax.set_xlabel("launch speed")
    ax.set_ylabel("impacts before detachment", color="tab:blue")
    twin = ax.twinx()
    twin.loglog(eps, sw["norm"][order], "s--", color="tab:red", label="distance")
    twin.set_ylabel("distance to the resting solution", color="tab:red")


def build_figure(spec: FigureSpec):
    """Validate the spec, read its tables, and return the figure."""
    if spec.kind not in KINDS:
        raise FigureError(f"unknown figure kind {spec.kind!r}; choose from {', '.join(KINDS)}")
    if spec.projection not in ("2d", "3d"):
        raise FigureError(f"unknown projection {spec.projection!r}; choose 2d or 3d")
    if spec.projection == "3d" and spec.kind != "contact-sequence":
        raise FigureError("only contact-sequence supports the 3d projection")
    fig = plt.figure(figsize=(8.0, 5.0))
    try:
        if spec.kind == "contact-sequence" and spec.projection == "3d":
            ax = fig.add_subplot(projection="3d")
        else:
            ax = fig.add_subplot()
        {
            "trajectory": _trajectory,
            "restitution": _restitution,
            "contact-sequence": _contact_sequence,
            "convergence": _convergence,
        }[spec.kind](spec, ax)
        if spec.title:
            ax.set_title(spec.title)
        if spec.timestamp:
            fig.text(
                0.99,
                0.01,
                datetime.now().isoformat(timespec="seconds"),
                ha="right",
                va="bottom",
                fontsize=7,
                color="gray",
            )
        fig.tight_layout()
    except Exception:
        plt.close(fig)
        raise
    return fig


def render(spec: FigureSpec) -> Path:
    """Build the figure and write it to ``spec.out``; returns the path."""
    out = Path(spec.out)
    if out.suffix.lower() not in FORMATS:
        raise FigureError(
            f"unsupported output format {out.suffix or '(none)'!r}; "
            f"use one of {', '.join(FORMATS)}"
        )
    fig = build_figure(spec)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        # SVG and PDF stamp a creation date by default; strip it so the
        # bytes depend only on the inputs.
        metadata = {".svg": {"Date": None}, ".pdf": {"CreationDate": None}}.get(
            out.suffix.lower()
        )
        fig.savefig(out, dpi=spec.dpi, metadata=metadata)
    finally:
        plt.close(fig)
    return out
