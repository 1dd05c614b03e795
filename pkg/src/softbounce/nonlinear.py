"""Nonlinear-spring variant of the two-mass model.

The internal mode obeys xi'' = -rho*xi*|xi|^a - 2*mu*xidot*|xi|^b while the
center of mass stays ballistic, so closed forms are gone and flights are
integrated numerically with an embedded 5(4) pair, error-controlled per unit
time.  Impacts are still the instantaneous velocity swap of the linear
model; contact instants are located by a sign change of x across accepted
steps plus root-finding on cubic dense output.

For 0 < b < 1 the damping term is not Lipschitz at xi = 0; steps that cross
the kink are shortened so the error estimator meets it at small stepsize.
Setting a = b = 0, rho = 1 reproduces the linear model exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import FLOOR_TOL, BallState, ModelParams, from_cm, to_cm, validate_above_floor
from .engine import (
    ASYMPTOTIC_FLOOR,
    IMPACT_LIMIT,
    REGULAR,
    TIME_LIMIT,
    ContactEvent,
    DegenerateContact,
    EngineConfig,
    InsufficientTail,
    NoContact,
    SimulationLog,
    collide,
)

# Local error budget per unit time, and the retry bound of a single step.
_TOL = 1e-11
_MAX_REJECTS = 60


class StepFailure(RuntimeError):
    """A step kept failing its error test down to the smallest tried size."""


@dataclass(frozen=True, slots=True)
class NonlinearParams:
    """Spring/damper exponents and strength on top of the base parameters."""

    base: ModelParams
    rho: float = 1.0
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.rho <= 0.0:
            raise ValueError(f"spring strength must be positive, got rho = {self.rho}")
        if self.a < 0.0 or self.b < 0.0:
            raise ValueError(f"exponents must be nonnegative, got a = {self.a}, b = {self.b}")
        if self.base.mu <= 0.0:
            raise ValueError("the nonlinear variant needs mu > 0")

    @property
    def gamma(self) -> float:
        return self.base.gamma

    @property
    def mu(self) -> float:
        return self.base.mu


def nonlinear_equilibrium_xi(p: NonlinearParams) -> float:
    """Static rest value of the internal mode: spring force balancing weight."""
    return -((p.gamma / p.rho) ** (1.0 / (p.a + 1.0)))


def nonlinear_energy(s: BallState, p: NonlinearParams) -> float:
    psi, psidot, xi, xidot = to_cm(s)
    spring = p.rho / (p.a + 2.0) * abs(xi) ** (p.a + 2.0)
    return 0.5 * psidot * psidot + 0.5 * xidot * xidot + spring + p.gamma * psi


def _rhs(u, p: NonlinearParams):
    psi, psidot, xi, xidot = u
    axi = abs(xi)
    return (
        psidot,
        -p.gamma,
        xidot,
        -p.rho * xi * axi**p.a - 2.0 * p.mu * xidot * axi**p.b,
    )


# Dormand-Prince 5(4) coefficients; the last stage row doubles as the 5th
# order weights (first-same-as-last).
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def _try_step(u, k1, h, p):
    """One 5(4) attempt from u with derivative k1; returns (u5, k7, err_inf)."""
    ks = [k1]
    for row in _A[1:]:
        v = list(u)
        for j, a_ij in enumerate(row):
            if a_ij != 0.0:
                kj = ks[j]
                for m in range(4):
                    v[m] += h * a_ij * kj[m]
        ks.append(_rhs(v, p))
    u5 = tuple(v)  # the last stage vector is the 5th order solution
    k7 = ks[6]
    err = 0.0
    for m in range(4):
        e = 0.0
        for j in range(7):
            e += _E[j] * ks[j][m]
        err = max(err, abs(h * e))
    return u5, k7, err


def _cap_for_kink(u, h, p):
    """Shorten a step that would cross xi = 0 when the damping has a kink."""
    if not 0.0 < p.b < 1.0:
        return h
    xi, xidot = u[2], u[3]
    if xi == 0.0 or xidot == 0.0:
        return h
    t_cross = -xi / xidot
    if 0.0 < t_cross < h:
        return min(h, max(1.5 * t_cross, 1e-8))
    return h


def _advance(u, k1, h_try, p):
    """Advance one accepted step; returns (u_new, k_new, h_used, h_next, err)."""
    h = h_try
    for _ in range(_MAX_REJECTS):
        h = _cap_for_kink(u, h, p)
        try:
            u5, k7, err = _try_step(u, k1, h, p)
        except OverflowError:
            h *= 0.2
            continue
        scale = max(1.0, max(abs(c) for c in u))
        tol = _TOL * h * scale
        # nan components slip past a bare max(), so check the state too
        ok = math.isfinite(err) and all(math.isfinite(c) for c in u5)
        if ok and (err <= tol or h <= 1e-14):
            grow = 0.9 * (tol / err) ** 0.2 if err > 0.0 else 5.0
            h_next = h * min(5.0, max(0.2, grow))
            return u5, k7, h, h_next, err
        h *= max(0.2, 0.9 * (tol / err) ** 0.2) if ok else 0.2
    raise StepFailure(f"error test kept failing near t-step {h}")


def nonlinear_flight_step(
    state: BallState,
    p: NonlinearParams,
    dt_suggestion: float,
) -> tuple[BallState, float, float]:
    """One accepted adaptive step; returns (state, dt_used, error_estimate)."""
    if state.x < -FLOOR_TOL:
        raise ValueError(f"airborne step needs x >= 0, got {state.x}")
    if dt_suggestion <= 0.0:
        raise ValueError(f"step suggestion must be positive, got {dt_suggestion}")
    u = to_cm(state)
    u_new, _, h_used, _, err = _advance(u, _rhs(u, p), dt_suggestion, p)
    return from_cm(state.t + h_used, *u_new), h_used, err


def _hermite(theta, h, y0, d0, y1, d1):
    """Cubic through (0, y0) and (1, y1) with slopes h*d0, h*d1."""
    t2 = theta * theta
    t3 = t2 * theta
    return (
        (2 * t3 - 3 * t2 + 1) * y0
        + (t3 - 2 * t2 + theta) * h * d0
        + (-2 * t3 + 3 * t2) * y1
        + (t3 - t2) * h * d1
    )


def _x_root_in_step(u0, k0, u1, k1, h):
    """First zero crossing of x inside an accepted step, in (0, 1] of theta.

    Returns None when x stays positive.  Checks interior dips of the cubic as
    well, so a crossing that recovers before the endpoint still counts.
    """
    x0, xd0 = u0[0] - u0[2], k0[0] - k0[2]
    x1, xd1 = u1[0] - u1[2], k1[0] - k1[2]

    lo, hi = 0.0, None
    if x1 < 0.0:
        hi = 1.0
    else:
        # the cubic deviates from the chord by at most h(|d0-s| + |d1-s|)/4
        s = (x1 - x0) / h
        if min(x0, x1) - 0.25 * h * (abs(xd0 - s) + abs(xd1 - s)) > 0.0:
            return None
        floor_tol = -1e-14 * max(1.0, abs(x0))
        probes = 24
        for i in range(1, probes + 1):
            t = i / probes
            if _hermite(t, h, x0, xd0, x1, xd1) < floor_tol:
                hi = t
                lo = (i - 1) / probes
                break
        if hi is None:
            return None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _hermite(mid, h, x0, xd0, x1, xd1) <= 0.0:
            hi = mid
        else:
            lo = mid
        if (hi - lo) * h <= 1e-11:
            break
    return hi


def _snap_to_floor(u):
    m = 0.5 * (u[0] + u[2])
    return (m, u[1], m, u[3])


def _rk4(u, h, p):
    """One classical fixed step; used only for tiny Newton corrections."""
    k1 = _rhs(u, p)
    u2 = tuple(u[m] + 0.5 * h * k1[m] for m in range(4))
    k2 = _rhs(u2, p)
    u3 = tuple(u[m] + 0.5 * h * k2[m] for m in range(4))
    k3 = _rhs(u3, p)
    u4 = tuple(u[m] + h * k3[m] for m in range(4))
    k4 = _rhs(u4, p)
    return tuple(
        u[m] + h / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]) for m in range(4)
    )


def _polish_contact(u0, k0, h, theta, p):
    """Contact time and state at integrator accuracy, not dense-output accuracy.

    Re-integrates from the step's left endpoint to the interpolated root, then
    Newton-corrects the time with exact velocities (tiny signed steps).
    """
    target = theta * h
    u, k, t = u0, k0, 0.0
    h_next = target
    while t < target * (1.0 - 1e-15):
        u, k, used, h_next, _ = _advance(u, k, min(h_next, target - t), p)
        t += used
    scale = max(1.0, abs(u[0]))
    for _ in range(8):
        x = u[0] - u[2]
        if abs(x) <= 1e-14 * scale:
            break
        xdot = u[1] - u[3]
        if xdot == 0.0:
            break
        delta = max(-h, min(h, -x / xdot))
        u = _rk4(u, delta, p)
        t += delta
    return t, u


class _BudgetExhausted(Exception):
    """Internal: the flight reached its budget airborne, carrying (tau, u)."""

    def __init__(self, tau, u):
        self.tau = tau
        self.u = u


def _integrate_to_contact(u, p, budget):
    """(tau, contact u) along the nonlinear flight; _BudgetExhausted at budget."""
    t = 0.0
    k = _rhs(u, p)
    h_next = 0.01
    while True:
        if t >= budget:
            raise _BudgetExhausted(t, u)
        h_try = min(h_next, budget - t)
        u1, k1, h, h_next, _ = _advance(u, k, h_try, p)
        theta = _x_root_in_step(u, k, u1, k1, h)
        if theta is not None and t + theta * h > 1e-12:
            tau_c, uc = _polish_contact(u, k, h, theta, p)
            return t + tau_c, _snap_to_floor(uc)
        t += h
        u, k = u1, k1


def nonlinear_find_contact(
    state: BallState,
    p: NonlinearParams,
    cfg: EngineConfig,
) -> tuple[float, BallState]:
    """First floor contact along the nonlinear flight from ``state``.

    The budget is ``cfg.t_max`` of flight time; raises NoContact (carrying the
    state at the budget) when the lower mass stays airborne throughout.
    """
    if state.x < -FLOOR_TOL:
        raise ValueError(f"flight needs x >= 0, got {state.x}")
    try:
        tau, uc = _integrate_to_contact(to_cm(state), p, cfg.t_max)
    except _BudgetExhausted as be:
        raise NoContact(be.tau, from_cm(state.t + be.tau, *be.u)) from None
    return tau, from_cm(state.t + tau, *uc)


def run_nonlinear(
    initial: BallState,
    p: NonlinearParams,
    cfg: EngineConfig | None = None,
) -> SimulationLog:
    """Alternate integrated flights and collisions from ``initial``.

    Persistent and grazing contacts are outside this variant's scope: a
    contact arriving slower than ``v_eps`` is reported as degenerate.  The
    asymptotics field stays empty; tail analysis lives in
    ``nonlinear_asymptotic_alpha``.
    """
    if cfg is None:
        cfg = EngineConfig()
    validate_above_floor(initial)
    t_end = initial.t + cfg.t_max
    log = SimulationLog(params=p, config=cfg, initial=initial)
    events = log.events

    def record(t, tau, xdot_pre, post):
        events.append(
            ContactEvent(
                n=len(events),
                t=t,
                tau=tau,
                kind=REGULAR,
                xdot_pre=xdot_pre,
                xdot_post=post.xdot,
                y=post.y,
                ydot=post.ydot,
                energy=nonlinear_energy(post, p),
            )
        )

    def finish(reason, final):
        log.termination = reason
        log.final_state = final
        return log

    state = initial
    if state.x <= FLOOR_TOL:
        if state.xdot < -cfg.v_eps:
            post = collide(BallState(state.t, 0.0, state.xdot, state.y, state.ydot))
            record(state.t, 0.0, state.xdot, post)
            state = post
        elif state.xdot <= cfg.v_eps:
            raise DegenerateContact(
                f"the nonlinear variant handles only departing or impacting floor "
                f"states, got xdot = {state.xdot}"
            )

    while True:
        budget = t_end - state.t
        if budget <= 0.0:
            return finish(TIME_LIMIT, state)
        try:
            tau, uc = _integrate_to_contact(to_cm(state), p, budget)
        except _BudgetExhausted as be:
            return finish(TIME_LIMIT, from_cm(state.t + be.tau, *be.u))
        arrival = from_cm(state.t + tau, *uc)
        if arrival.xdot >= -cfg.v_eps:
            raise DegenerateContact(
                f"contact arrived at speed {arrival.xdot}; grazing and persistent "
                f"contact are outside the nonlinear variant's scope"
            )
        post = collide(arrival)
        record(arrival.t, tau, arrival.xdot, post)
        state = post
        if len(events) > 1 and tau < cfg.tau_floor:
            return finish(ASYMPTOTIC_FLOOR, state)
        if len(events) >= cfg.max_impacts:
            return finish(IMPACT_LIMIT, state)


def nonlinear_asymptotic_alpha(
    run: SimulationLog,
    p: NonlinearParams,
) -> tuple[float, float]:
    """Tail estimate of the quadratic-map loss coefficient, with its theory value.

    Fits alpha_n = (V_n - V_{n+1}) / V_n^2 from consecutive rebound speeds over
    the last decade of impacts (median, for robustness) and returns it next to
    the predicted limit mu/(3 gamma) * (gamma/rho)^(b/(a+1)).
    """
    ev = [e for e in run.events if e.kind == REGULAR]
    n = len(ev)
    lo = max(1, n // 10)
    if n - lo - 1 < 100:
        raise InsufficientTail(f"need at least 100 tail impact pairs, got {max(0, n - lo - 1)}")
    alphas = []
    for a, b in zip(ev[lo:-1], ev[lo + 1:]):
        v = a.xdot_post
        alphas.append((v - b.xdot_post) / (v * v))
    alphas.sort()
    m = len(alphas)
    alpha_hat = alphas[m // 2] if m % 2 else 0.5 * (alphas[m // 2 - 1] + alphas[m // 2])
    alpha_theory = p.mu / (3.0 * p.gamma) * (p.gamma / p.rho) ** (p.b / (p.a + 1.0))
    return alpha_hat, alpha_theory
