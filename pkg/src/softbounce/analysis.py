"""Estimators and comparison experiments computed from simulation logs.

Three protocols live here: the flight-time restitution coefficient of a
very rigid drop, the tail report of the slow asymptotic stopping regime,
and the convergence sweep of near-onset launches toward the persistent
contact solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .core import FLOOR_TOL, BallState, ModelParams
from .engine import (
    ASYMPTOTIC_FLOOR,
    REGULAR,
    STICKY_END,
    EngineConfig,
    InsufficientTail,
    SimulationLog,
    run_simulation,
)


class InsufficientFlights(ValueError):
    """Too few flights to form the restitution sequence."""


@dataclass(frozen=True, slots=True)
class RestitutionSeries:
    """Flight-time restitution estimates of a double-impact-regime run.

    A bounce of a barely deformable ball is a pair of floor hits separated
    by one internal vibration; only every second flight is macroscopic.
    ``flights`` holds those durations, ``ratios`` their successive quotients,
    and ``plateau`` the mean of the early ratios.  The first ratio is skipped
    there: a run released from rest opens with a half flight.
    """

    flights: list[float]
    ratios: list[float]
    plateau: float


def restitution_from_flights(log: SimulationLog, plateau_count: int = 10) -> RestitutionSeries:
    """Restitution sequence r_n = f_{n+1} / f_n from macroscopic flight times."""
    flights = [e.tau for e in log.events[::2]]
    if len(flights) < 4:
        raise InsufficientFlights(
            f"need at least 4 macroscopic flights, got {len(flights)}"
        )
    ratios = [b / a for a, b in zip(flights, flights[1:])]
    early = ratios[1 : 1 + plateau_count]
    return RestitutionSeries(flights, ratios, sum(early) / len(early))


def asymptotic_report(log: SimulationLog) -> dict:
    """Last-decade statistics of the slow stopping regime.

    Requires a run that actually reached the accumulation guard and a tail
    of at least 1000 impact pairs.  Over the last decade of impacts the
    flight times follow tau_n ~ 3/(mu n), the rebound speeds
    v_n ~ 3 gamma / (mu n), and their quotient v_n / tau_n -> gamma; the
    report normalizes each so the targets are all 1, and gives the mean,
    the relative spread (max minus min over mean), and the fitted log-log
    exponent of the flight times.
    """
    if log.termination != ASYMPTOTIC_FLOOR:
        raise ValueError(
            f"report needs a run stopped by the accumulation guard, "
            f"got termination {log.termination!r}"
        )
    ev = log.events
    p = log.params
    n = len(ev)
    lo = max(1, n // 10)
    if n - lo - 1 < 1000:
        raise InsufficientTail(
            f"need at least 1000 tail impact pairs, got {max(0, n - lo - 1)}"
        )
    r_tau = []
    r_speed = []
    r_quot = []
    ln_n = []
    ln_tau = []
    for i in range(lo, n - 1):
        tau = ev[i + 1].t - ev[i].t
        v = ev[i].xdot_post
        r_tau.append(i * tau * p.mu / 3.0)
        r_speed.append(i * v * p.mu / (3.0 * p.gamma))
        r_quot.append(v / (tau * p.gamma))
        ln_n.append(math.log(i))
        ln_tau.append(math.log(tau))
    m = len(r_tau)
    mx = sum(ln_n) / m
    my = sum(ln_tau) / m
    sxx = sum((a - mx) ** 2 for a in ln_n)
    sxy = sum((a - mx) * (b - my) for a, b in zip(ln_n, ln_tau))

    def stats(vals):
        mean = sum(vals) / m
        return {"mean": mean, "spread": (max(vals) - min(vals)) / mean}

    return {
        "n_tail": m,
        "tau_ratio": stats(r_tau),
        "speed_ratio": stats(r_speed),
        "speed_over_tau": stats(r_quot),
        "tau_exponent": sxy / sxx,
    }


def rms_difference(values_a: list[float], values_b: list[float]) -> float:
    """Root mean square of a - b over a uniform grid, trapezoid weighted.

    With constant shift a = b + d this returns exactly |d|.
    """
    n = len(values_a)
    if n != len(values_b) or n < 2:
        raise ValueError(f"need two equal grids of >= 2 samples, got {n}, {len(values_b)}")
    total = 0.0
    for k, (a, b) in enumerate(zip(values_a, values_b)):
        w = 0.5 if k in (0, n - 1) else 1.0
        total += w * (a - b) ** 2
    return math.sqrt(total / (n - 1))


def onset_family_state(p: ModelParams, epsilon: float, ydot0: float = -0.1) -> BallState:
    """Launch state on the floor: zero height, speed epsilon, onset-level y."""
    return BallState(0.0, 0.0, epsilon, 1.0 + 2.0 * p.gamma - 2.0 * p.mu * ydot0, ydot0)


@dataclass(frozen=True, slots=True)
class SweepRow:
    epsilon: float
    impacts: int
    norm: float


@dataclass(frozen=True, slots=True)
class StickySweepResult:
    """Convergence table of launches with speed epsilon toward the epsilon = 0 run.

    ``t_c`` is the contact duration of the reference run, ``grid_dt`` the
    common sample spacing of the norm quadrature; rows are ordered as given.
    """

    t_c: float
    grid_dt: float
    rows: list[SweepRow]


def sticky_sweep(
    epsilons: list[float],
    base: BallState,
    p: ModelParams,
    samples: int = 2048,
) -> StickySweepResult:
    """Compare launches at small upward speeds against the resting contact run.

    ``base`` must sit on the floor at rest with the upper mass at the exact
    contact-onset height for its velocity and pressing down.  The base run
    begins a persistent contact immediately; its detachment time defines the
    window (0, t_c).  Each epsilon run restarts with the lower mass kicked
    up at that speed, counts its floor hits inside the window, and measures
    the root mean square distance of the upper-mass path from the base run
    on a common grid.
    """
    onset_y = 1.0 + 2.0 * p.gamma - 2.0 * p.mu * base.ydot
    if abs(base.x) > FLOOR_TOL or base.xdot != 0.0:
        raise ValueError("base state must rest on the floor with xdot = 0")
    if abs(base.y - onset_y) > 1e-9:
        raise ValueError(
            f"base upper mass must sit at the contact-onset height {onset_y}, got {base.y}"
        )
    if base.ydot >= 4.0 * p.gamma * p.mu:
        raise ValueError(f"base upper mass must press down, got ydot = {base.ydot}")
    if any(e < 0.0 for e in epsilons):
        raise ValueError("launch speeds must be nonnegative")
    if samples < 2:
        raise ValueError(f"need at least 2 samples, got {samples}")

    # the reference run only needs to reach its detachment event
    probe = run_simulation(base, p, EngineConfig(t_max=1e4, tau_floor=0.0, max_impacts=4))
    ends = [e for e in probe.events if e.kind == STICKY_END]
    if not ends:
        raise ValueError("base run never detaches; no comparison window exists")
    t_c = ends[0].t - base.t

    dt = t_c / (samples - 1)
    cfg = EngineConfig(
        t_max=t_c + 2.0 * dt,
        tau_floor=0.0,
        max_impacts=1_000_000,
        sample_dt=dt,
    )

    def upper_path(start: BallState) -> tuple[list[float], list]:
        log = run_simulation(start, p, cfg)
        ys = [s.y for s in log.trajectory[:samples]]
        if len(ys) < samples:
            raise RuntimeError(
                f"run from epsilon = {start.xdot} ended before the window: "
                f"{len(ys)} of {samples} samples"
            )
        return ys, log.events

    y_ref, _ = upper_path(base)
    rows = []
    for eps in epsilons:
        if eps == 0.0:
            rows.append(SweepRow(0.0, 0, 0.0))
            continue
        ys, events = upper_path(replace(base, xdot=eps))
        hits = sum(1 for e in events if e.kind == REGULAR and 0.0 < e.t - base.t < t_c)
        rows.append(SweepRow(eps, hits, rms_difference(ys, y_ref)))
    return StickySweepResult(t_c, dt, rows)
