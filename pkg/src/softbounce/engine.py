"""Event-driven simulation loop.

Each flight is a closed form, so the only numerics are locating its first
return to the floor and deciding what kind of contact that is.  The search
never misses a crossing by construction: samples are spaced well below both
characteristic periods, near-grazing dips are bracketed through the sign of
xdot, and the stretch of flight where the ballistic center of mass rides
above the whole vibration envelope (where contact is impossible) is jumped
over analytically instead of sampled.

Contacts split by arrival velocity and floor force into regular impacts,
grazing touches, and onsets of persistent contact; the persistent phase is
delegated to the sticky module and re-enters flight at detachment.  A run
ends at the time budget, the impact budget, the flight-time floor (the
impact accumulation guard), or the certified absence of detachment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .core import (
    FLOOR_TOL,
    BallState,
    ModelParams,
    characteristic_times,
    energy,
    floor_force,
    validate_above_floor,
)
from .flight import FlightSolution, build_flight
from .sticky import build_sticky, contact_time_scale, find_detachment

# Contact kinds as logged.
REGULAR = "Regular"
GRAZING = "Grazing"
STICKY_START = "StickyStart"
STICKY_END = "StickyEnd"

# Termination reasons as logged.
TIME_LIMIT = "TimeLimit"
IMPACT_LIMIT = "ImpactLimit"
ASYMPTOTIC_FLOOR = "AsymptoticFloor"
INFINITE_STICKY = "InfiniteSticky"


class NoContact(Exception):
    """The lower mass stays airborne through the whole time budget.

    Carries the flight offset and state at the budget so the caller can
    report it; not a fault.
    """

    def __init__(self, tau: float, state: BallState):
        super().__init__(f"no floor contact within {tau} time units")
        self.tau = tau
        self.state = state


class DegenerateContact(RuntimeError):
    """A contact state the model rules out; signals a numerical fault upstream."""


class InsufficientTail(ValueError):
    """Not enough tail impacts for an asymptotic estimate."""


@dataclass(slots=True)
class EngineConfig:
    """Tunable tolerances and budgets of the simulation loop.

    ``max_sticky_events`` is an empirical sanity bound, not physics: theory
    says the count is finite but gives no number, and no observed run comes
    anywhere near the default.
    """

    t_max: float = 1e4
    max_impacts: int = 1_000_000
    tau_floor: float = 1e-9
    v_eps: float = 1e-10
    a_eps: float = 1e-10
    dip_tol: float = 1e-12
    scan_divisor: int = 64
    sample_dt: float | None = None
    max_sticky_events: int = 1000
    tail_map_steps: int = 0


@dataclass(frozen=True, slots=True)
class ContactEvent:
    """One contact record.

    ``tau`` is the time since the previous event (the preceding flight time,
    except for StickyEnd where it is the contact-phase duration), measured
    from the start of the run for the first event.  ``energy`` is continuous
    across the contact, so one value serves both sides.
    """

    n: int
    t: float
    tau: float
    kind: str
    xdot_pre: float
    xdot_post: float
    y: float
    ydot: float
    energy: float


@dataclass(slots=True)
class SimulationLog:
    params: ModelParams
    config: EngineConfig
    initial: BallState
    events: list[ContactEvent] = field(default_factory=list)
    trajectory: list[BallState] | None = None
    termination: str = ""
    final_state: BallState | None = None
    asymptotics: dict | None = None


def collide(s: BallState) -> BallState:
    """Instantaneous collision map: the lower-mass velocity reverses, the
    upper mass is untouched; equivalently the two modal velocities swap."""
    return BallState(t=s.t, x=s.x, xdot=-s.xdot, y=s.y, ydot=s.ydot)


def classify_contact(s: BallState, p: ModelParams, cfg: EngineConfig) -> str:
    """Kind of the contact at state ``s`` (on the floor).

    Nonzero arrival speed means a regular impact.  At zero speed the free
    acceleration decides: positive lifts off immediately (grazing), zero with
    the upper mass pressing down starts a persistent contact.  Zero speed
    with negative acceleration would push the mass through the floor, which
    the constraint forbids: that cannot be reached by an actual trajectory
    and is reported as a fault.
    """
    if abs(s.x) > 1e-9:
        raise DegenerateContact(f"classification off the floor: x = {s.x}")
    if s.xdot < -cfg.v_eps:
        return REGULAR
    if s.xdot > cfg.v_eps:
        raise DegenerateContact(f"contact reached moving upward: xdot = {s.xdot}")
    xddot = floor_force(s, p) - p.mu * s.xdot - 0.5 * s.x
    if xddot > cfg.a_eps:
        return GRAZING
    if abs(xddot) <= cfg.a_eps:
        if s.ydot < 4.0 * p.gamma * p.mu:
            return STICKY_START
        raise DegenerateContact(
            f"zero speed and zero acceleration but the upper mass is not pressing down "
            f"(ydot = {s.ydot})"
        )
    raise DegenerateContact(
        f"zero-speed contact with negative free acceleration {xddot}; "
        f"the constraint makes this unreachable"
    )


def _refine_crossing(f: FlightSolution, lo: float, hi: float, x_tol: float) -> float:
    """Zero of x in (lo, hi], given x(lo) > 0 >= x(hi): bisection then Newton."""
    x_eval = f.x_xdot
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        if x_eval(mid)[0] > 0.0:
            lo = mid
        else:
            hi = mid
    tau = 0.5 * (lo + hi)
    for _ in range(60):
        x, xd = x_eval(tau)
        if x > 0.0:
            lo = tau
        else:
            hi = tau
        if abs(x) <= x_tol or hi - lo <= 1e-13 * max(1.0, hi):
            break
        if xd != 0.0:
            cand = tau - x / xd
            if not lo < cand < hi:
                cand = 0.5 * (lo + hi)
        else:
            cand = 0.5 * (lo + hi)
        if cand == tau:
            break
        tau = cand
    return tau


def _refine_minimum(f: FlightSolution, lo: float, hi: float) -> float:
    """Zero of xdot in [lo, hi], given xdot(lo) < 0 <= xdot(hi)."""
    x_eval = f.x_xdot
    for _ in range(80):
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        if x_eval(mid)[1] < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _departure_offset(f: FlightSolution, step: float, clear: float) -> float:
    """First scan offset, placed so the start-of-flight root is excluded.

    Uses the leading Taylor term of x (velocity, then acceleration, then the
    third derivative for cubic departures) to find where x analytically
    clears the refinement tolerance, capped at a quarter step so no real
    structure is skipped.
    """
    t_vib = characteristic_times(f.params).t_vibration
    tau0 = 1e-9 * max(1.0, t_vib if t_vib is not None else 1.0)
    x0, xd0, xdd0, xddd0 = f.x_derivatives(0.0)
    if x0 > clear:
        return min(tau0, 0.25 * step)
    cands = []
    if xd0 > 0.0:
        cands.append(clear / xd0)
    if xdd0 > 0.0:
        cands.append(math.sqrt(2.0 * clear / xdd0))
    if xddd0 > 0.0:
        cands.append((6.0 * clear / xddd0) ** (1.0 / 3.0))
    if not cands:
        raise DegenerateContact(
            f"flight origin is not departing the floor: x = {x0}, xdot = {xd0}, "
            f"xddot = {xdd0}, xdddot = {xddd0}"
        )
    return min(max(tau0, min(cands)), 0.25 * step)


def find_next_contact(
    f: FlightSolution,
    p: ModelParams,
    cfg: EngineConfig,
    t_budget: float | None = None,
) -> tuple[float, BallState]:
    """First return of the lower mass to the floor along flight ``f``.

    Returns the flight offset and the terminal state with x snapped to zero
    exactly.  Scans at 1/scan_divisor of the shortest characteristic period,
    brackets both sign changes and near-grazing minima, and jumps over the
    stretch where the ballistic center of mass exceeds the whole vibration
    envelope (contact is impossible there).  Raises NoContact when the budget
    runs out first.
    """
    g = p.gamma
    x_eval = f.x_xdot
    psi0 = f.psi0
    psid0 = f.psidot0
    scale = max(1.0, abs(psi0))
    x_tol = 1e-13 * scale
    if t_budget is None:
        t_budget = cfg.t_max

    # The vibration energy never grows, so |xi| <= M0 for all time and the
    # flight cannot outlive the parabola's fall to -M0.
    m0 = math.hypot(f.xi0, f.xidot0)
    tau_ub = (psid0 + math.sqrt(psid0 * psid0 + 2.0 * g * (psi0 + m0))) / g
    if tau_ub <= 0.0:
        raise DegenerateContact("flight cannot leave the floor (zero ballistic bound)")
    budget_limited = t_budget < tau_ub
    horizon = min(tau_ub, t_budget)

    ct = characteristic_times(p)
    t_vib = ct.t_vibration if ct.t_vibration is not None else math.inf
    step = min(t_vib, ct.t_fall, horizon) / cfg.scan_divisor

    # Interval where psi > M0: x > 0 is guaranteed, skip it analytically.
    dsk = psid0 * psid0 + 2.0 * g * (psi0 - m0)
    has_skip = False
    skip_lo = skip_hi = 0.0
    if dsk > 0.0:
        r = math.sqrt(dsk)
        skip_lo = (psid0 - r) / g
        skip_hi = (psid0 + r) / g
        has_skip = skip_hi > 0.0

    t_prev = _departure_offset(f, step, x_tol)
    x_prev, xd_prev = x_eval(t_prev)
    if x_prev <= 0.0:
        # The departure analysis said this point is clear of the floor; a
        # nonpositive value here means the flight was started from a contact
        # that should have been classified instead.
        raise DegenerateContact(f"flight re-enters the floor immediately: x({t_prev}) = {x_prev}")

    while t_prev < horizon:
        t_cur = min(t_prev + step, horizon)
        jumped = False
        if has_skip and skip_lo < t_cur < skip_hi:
            if t_prev < skip_lo:
                t_cur = skip_lo  # sample the entry edge first
            else:
                t_cur = min(skip_hi, horizon)
                jumped = True
        if t_cur <= t_prev:
            break
        x_cur, xd_cur = x_eval(t_cur)
        if x_cur <= 0.0:
            lo = t_prev
            if jumped:
                # x > 0 holds strictly inside the skipped stretch; only the
                # exit edge can sit on the floor to within roundoff.
                lo = max(t_prev, 0.5 * (skip_lo + min(skip_hi, horizon)))
            tau = _refine_crossing(f, lo, t_cur, x_tol)
            return tau, _snap(f, tau)
        if not jumped and xd_prev < 0.0 <= xd_cur:
            # Passed a local minimum of x; it may dip to the floor between
            # samples even though both endpoints are airborne.
            t_min = _refine_minimum(f, t_prev, t_cur)
            x_min, _ = x_eval(t_min)
            if x_min <= 0.0:
                tau = _refine_crossing(f, t_prev, t_min, x_tol)
                return tau, _snap(f, tau)
            # A minimum in (0, dip_tol] is a positive miss, not a contact.
        t_prev, x_prev, xd_prev = t_cur, x_cur, xd_cur

    if budget_limited:
        raise NoContact(horizon, f.state(horizon))
    # The ballistic bound says x(tau_ub) <= 0, so reaching here means the
    # crossing sits within roundoff of the bound; nudge past it.
    for i in range(1, 9):
        t_try = horizon + 0.5 * i * step
        if x_eval(t_try)[0] <= 0.0:
            tau = _refine_crossing(f, t_prev, t_try, x_tol)
            return tau, _snap(f, tau)
    raise DegenerateContact("contact search ran past the ballistic bound without a crossing")


def _snap(f: FlightSolution, tau: float) -> BallState:
    s = f.state(tau)
    return BallState(t=s.t, x=0.0, xdot=s.xdot, y=s.y, ydot=s.ydot)


class _GridSampler:
    """Collects states on the fixed grid t = t0 + k*dt, across segments."""

    __slots__ = ("t0", "dt", "k", "rows")

    def __init__(self, t0: float, dt: float):
        self.t0 = t0
        self.dt = dt
        self.k = 0
        self.rows: list[BallState] = []

    def extend(self, state_at, t_from: float, t_to: float) -> None:
        """Sample every grid point in [t_from, t_to] with states from ``state_at(t)``."""
        while True:
            t = self.t0 + self.k * self.dt
            if t > t_to:
                return
            if t >= t_from:
                self.rows.append(state_at(t))
            self.k += 1


def tail_statistics(events: list[ContactEvent], p: ModelParams) -> dict:
    """Last-decade averages of the impact-law ratios and the flight-time exponent.

    Over the last decade of events (index N/10 to N), the flight time and
    impact speed should follow tau_n ~ 3/(mu n) and speed_n ~ 3 gamma/(mu n),
    with their ratio tending to gamma.  Returns the mean normalized ratios
    (each should be near 1) and the fitted log-log exponent of tau_n vs n
    (should be near -1).
    """
    n_events = len(events)
    lo = max(1, n_events // 10)
    taus = []
    ns = []
    speeds = []
    for i in range(lo, n_events - 1):
        taus.append(events[i + 1].t - events[i].t)
        speeds.append(events[i].xdot_post)
        ns.append(float(i))
    m = len(taus)
    if m == 0:
        return {"n_tail": 0}
    g = p.gamma
    mu = p.mu
    r_tau = sum(n * tau * mu / 3.0 for n, tau in zip(ns, taus)) / m
    r_speed = sum(n * v * mu / (3.0 * g) for n, v in zip(ns, speeds)) / m
    r_ratio = sum(v / (tau * g) for v, tau in zip(speeds, taus)) / m
    # least-squares slope of ln tau vs ln n
    lx = [math.log(n) for n in ns]
    ly = [math.log(tau) for tau in taus]
    mx = sum(lx) / m
    my = sum(ly) / m
    sxx = sum((a - mx) ** 2 for a in lx)
    sxy = sum((a - mx) * (b - my) for a, b in zip(lx, ly))
    exponent = sxy / sxx if sxx > 0.0 else math.nan
    return {
        "n_tail": m,
        "tau_ratio": r_tau,
        "speed_ratio": r_speed,
        "speed_over_tau": r_ratio,
        "tau_exponent": exponent,
    }


def _map_tail(xdot: float, p: ModelParams, steps: int) -> list[float]:
    """Analytic continuation of the impact speed by its terminal quadratic map."""
    alpha = p.mu / (3.0 * p.gamma)
    out = []
    v = xdot
    for _ in range(steps):
        v = (1.0 - alpha * v) * v
        if v <= 0.0:
            break
        out.append(v)
    return out


def run_simulation(
    initial: BallState,
    p: ModelParams,
    cfg: EngineConfig | None = None,
) -> SimulationLog:
    """Alternate flights, collisions, and persistent-contact phases from ``initial``.

    Records every contact event and terminates at the time budget, the impact
    budget, a flight shorter than ``tau_floor`` (the accumulation guard, which
    also reports the extrapolated impact-law tail), or a certified infinite
    contact phase.  An initial state on the floor is triaged the same way as
    a detected contact; a state inside a persistent-contact phase (negative
    floor force) resumes it without logging an onset.
    """
    if cfg is None:
        cfg = EngineConfig()
    validate_above_floor(initial)
    t_end = initial.t + cfg.t_max
    log = SimulationLog(params=p, config=cfg, initial=initial)
    events = log.events
    sampler = _GridSampler(initial.t, cfg.sample_dt) if cfg.sample_dt else None
    sticky_count = 0

    def record(t: float, kind: str, xdot_pre: float, post: BallState) -> None:
        prev_t = events[-1].t if events else initial.t
        events.append(
            ContactEvent(
                n=len(events),
                t=t,
                tau=t - prev_t,
                kind=kind,
                xdot_pre=xdot_pre,
                xdot_post=post.xdot,
                y=post.y,
                ydot=post.ydot,
                energy=energy(post, p),
            )
        )

    def finish(reason: str, final: BallState) -> SimulationLog:
        log.termination = reason
        log.final_state = final
        if sampler is not None:
            log.trajectory = sampler.rows
        if reason == ASYMPTOTIC_FLOOR:
            log.asymptotics = tail_statistics(events, p)
            if cfg.tail_map_steps > 0 and events:
                log.asymptotics["map_tail"] = _map_tail(
                    events[-1].xdot_post, p, cfg.tail_map_steps
                )
        return log

    # Triage of the starting state: airborne, impacting, departing, at a
    # contact onset, or inside a persistent phase.
    state = initial
    in_sticky = False
    sticky_has_onset = False
    if state.x <= FLOOR_TOL:
        on_floor = replace(state, x=0.0)
        if state.xdot < -cfg.v_eps:
            post = collide(on_floor)
            record(post.t, REGULAR, on_floor.xdot, post)
            state = post
        elif state.xdot <= cfg.v_eps:
            f0 = floor_force(on_floor, p)
            if f0 > cfg.a_eps:
                state = on_floor  # departing: free acceleration lifts it off
            elif f0 < -cfg.a_eps:
                state = replace(on_floor, xdot=0.0)
                in_sticky = True  # mid-phase resume, no onset event
            else:
                kind = classify_contact(replace(on_floor, xdot=0.0), p, cfg)
                if kind == STICKY_START:
                    post = replace(on_floor, xdot=0.0)
                    record(post.t, STICKY_START, on_floor.xdot, post)
                    state = post
                    in_sticky = True
                    sticky_has_onset = True
                    sticky_count += 1
                else:
                    state = on_floor  # grazing-level departure
        # else: moving upward on the floor, treat as a departing flight

    while True:
        remaining = t_end - state.t
        if remaining <= 0.0:
            return finish(TIME_LIMIT, state)

        if in_sticky:
            ss = build_sticky(state, p, require_onset=False, force_tol=max(cfg.a_eps, 1e-8))
            horizon = remaining
            if p.mu == 0.0:
                horizon = min(remaining, 1.25 * contact_time_scale(p))
            res = find_detachment(ss, horizon=horizon)
            if res.tau is None or res.tau >= remaining:
                final = ss.state(remaining)
                if sampler is not None:
                    sampler.extend(lambda t: ss.state(t - ss.onset.t), state.t, final.t)
                if res.tau is None and res.certified_never and sticky_has_onset:
                    return finish(INFINITE_STICKY, final)
                return finish(TIME_LIMIT, final)
            det = ss.state(res.tau)
            if sampler is not None:
                sampler.extend(lambda t: ss.state(t - ss.onset.t), state.t, det.t)
            record(det.t, STICKY_END, 0.0, det)
            state = det
            in_sticky = False
            if len(events) >= cfg.max_impacts:
                return finish(IMPACT_LIMIT, state)
            continue

        f = build_flight(state, p)
        try:
            tau, arrival = find_next_contact(f, p, cfg, t_budget=remaining)
        except NoContact as nc:
            if sampler is not None:
                sampler.extend(lambda t: f.state(t - f.origin.t), state.t, nc.state.t)
            return finish(TIME_LIMIT, nc.state)
        if sampler is not None:
            sampler.extend(lambda t: f.state(t - f.origin.t), state.t, arrival.t)

        kind = classify_contact(arrival, p, cfg)
        if kind == REGULAR:
            post = collide(arrival)
        elif kind == GRAZING:
            post = replace(arrival, xdot=abs(arrival.xdot))
        else:  # STICKY_START
            post = replace(arrival, xdot=0.0)
            in_sticky = True
            sticky_has_onset = True
            sticky_count += 1
            if sticky_count > cfg.max_sticky_events:
                raise RuntimeError(
                    f"recorded {sticky_count} persistent-contact onsets; "
                    f"the configured bound {cfg.max_sticky_events} is empirical, "
                    f"raise it if this run is legitimate"
                )
        record(arrival.t, kind, arrival.xdot, post)
        state = post

        if len(events) > 1 and tau < cfg.tau_floor:
            return finish(ASYMPTOTIC_FLOOR, state)
        if len(events) >= cfg.max_impacts:
            return finish(IMPACT_LIMIT, state)


def jump_relations_check(
    e: ContactEvent,
    f_pre: FlightSolution,
    f_post: FlightSolution,
) -> dict[str, tuple[float, float, float]]:
    """Jumps of the first three derivatives across a regular impact.

    Returns {name: (observed, expected, residual)} for the velocity,
    acceleration, and third-derivative jumps of both masses, with the
    expected values proportional to the rebound speed: [xdot] = 2 V,
    [xddot] = -2 mu V, [yddot] = +2 mu V, [xdddot] = -[ydddot] = (4 mu^2 - 1) V.
    """
    if e.kind != REGULAR:
        raise ValueError(f"jump relations apply to regular impacts, got {e.kind}")
    mu = f_pre.params.mu
    v = e.xdot_post
    pre = f_pre.x_derivatives(e.t - f_pre.origin.t)
    post = f_post.x_derivatives(e.t - f_post.origin.t)
    out = {}
    for name, obs, exp in (
        ("xdot", post[1] - pre[1], 2.0 * v),
        ("xddot", post[2] - pre[2], -2.0 * mu * v),
        ("yddot", pre[2] - post[2], 2.0 * mu * v),
        ("xdddot", post[3] - pre[3], (4.0 * mu * mu - 1.0) * v),
        ("ydddot", pre[3] - post[3], -(4.0 * mu * mu - 1.0) * v),
    ):
        out[name] = (obs, exp, obs - exp)
    return out
