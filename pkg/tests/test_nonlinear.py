"""Nonlinear spring/damping variant: stepper, contacts, asymptotics."""

import math

import pytest
from scipy.integrate import solve_ivp

from softbounce.core import BallState, ModelParams, from_cm, to_cm
from softbounce.engine import (
    ASYMPTOTIC_FLOOR,
    IMPACT_LIMIT,
    TIME_LIMIT,
    DegenerateContact,
    EngineConfig,
    NoContact,
    run_simulation,
)
from softbounce.flight import build_flight, eval_flight
from softbounce.nonlinear import (
    InsufficientTail,
    NonlinearParams,
    StepFailure,
    nonlinear_asymptotic_alpha,
    nonlinear_energy,
    nonlinear_equilibrium_xi,
    nonlinear_find_contact,
    nonlinear_flight_step,
    run_nonlinear,
)

LIN = ModelParams(0.01, 0.1)
REDUCED = NonlinearParams(base=LIN, rho=1.0, a=0.0, b=0.0)
HERTZ = NonlinearParams(base=LIN, rho=1.0, a=0.5, b=0.5)


def walk_flight(s, p, t_stop, dt=0.05):
    """Step until t_stop, yielding each accepted state."""
    while s.t < t_stop:
        s, _, _ = nonlinear_flight_step(s, p, min(dt, t_stop - s.t))
        yield s


# ---------------------------------------------------------------- parameters

def test_params_validation():
    with pytest.raises(ValueError):
        NonlinearParams(base=LIN, rho=0.0)
    with pytest.raises(ValueError):
        NonlinearParams(base=LIN, rho=-1.0)
    with pytest.raises(ValueError):
        NonlinearParams(base=LIN, a=-0.1)
    with pytest.raises(ValueError):
        NonlinearParams(base=LIN, b=-2.0)
    with pytest.raises(ValueError):
        NonlinearParams(base=ModelParams(0.01, 0.0))


def test_params_passthrough():
    p = NonlinearParams(base=ModelParams(0.02, 0.3), rho=2.0, a=1.0, b=0.5)
    assert p.gamma == 0.02
    assert p.mu == 0.3
    assert p.rho == 2.0


def test_equilibrium_compression():
    xi = nonlinear_equilibrium_xi(HERTZ)
    assert xi == pytest.approx(-0.046415888336127795, rel=1e-14)
    # force balance: spring term matches the weight
    assert HERTZ.rho * abs(xi) ** (HERTZ.a + 1.0) == pytest.approx(
        HERTZ.gamma, rel=1e-13
    )
    # and it is a strict minimum of the contact potential
    def potential(z):
        return HERTZ.rho / (HERTZ.a + 2.0) * abs(z) ** (HERTZ.a + 2.0) + HERTZ.gamma * z

    v0 = potential(xi)
    for d in (1e-4, 1e-3, 1e-2):
        assert potential(xi + d) > v0
        assert potential(xi - d) > v0


def test_equilibrium_reduces_to_linear():
    p = NonlinearParams(base=LIN, rho=1.0, a=0.0, b=0.0)
    assert nonlinear_equilibrium_xi(p) == pytest.approx(-LIN.gamma, rel=1e-15)


# ------------------------------------------------------------------- stepper

def test_reduction_to_closed_form_flight():
    """With unit linear laws the stepper must track the exact flight."""
    s0 = from_cm(0.0, 1.0, 0.2, 0.3, -0.1)
    f = build_flight(s0, LIN)
    worst = 0.0
    for s in walk_flight(s0, REDUCED, 1.0):
        ref = eval_flight(f, s.t)
        worst = max(
            worst,
            abs(s.x - ref.x),
            abs(s.xdot - ref.xdot),
            abs(s.y - ref.y),
            abs(s.ydot - ref.ydot),
        )
    assert worst < 1e-12


def test_step_validation():
    s = BallState(0.0, 1.0, 0.0, 2.0, 0.0)
    with pytest.raises(ValueError):
        nonlinear_flight_step(BallState(0.0, -0.5, 0.0, 1.0, 0.0), HERTZ, 0.1)
    with pytest.raises(ValueError):
        nonlinear_flight_step(s, HERTZ, 0.0)
    with pytest.raises(ValueError):
        nonlinear_flight_step(s, HERTZ, -1.0)


def test_step_respects_suggestion():
    s = BallState(0.0, 1.0, 0.1, 2.2, -0.05)
    out, h, err = nonlinear_flight_step(s, HERTZ, 0.03)
    assert 0.0 < h <= 0.03 * (1.0 + 1e-12)
    assert out.t == pytest.approx(s.t + h, abs=1e-15)
    assert err >= 0.0


def test_step_failure_on_blowup():
    bad = NonlinearParams(base=ModelParams(0.01, 0.5), rho=1e308, a=0.0, b=0.0)
    with pytest.raises(StepFailure):
        nonlinear_flight_step(BallState(0.0, 1.0, 0.0, 22.0, 0.0), bad, 1.0)


def test_flight_stays_above_floor():
    s = BallState(0.0, 0.2, -0.1, 1.4, -0.1)
    tau, _ = nonlinear_find_contact(s, HERTZ, EngineConfig())
    for st in walk_flight(s, HERTZ, s.t + 0.97 * tau):
        assert st.x >= -1e-12


# -------------------------------------------------------------------- energy

def test_energy_dissipates_along_flight():
    s = BallState(0.0, 0.8, 0.1, 2.0, -0.05)
    e_prev = nonlinear_energy(s, HERTZ)
    for st in walk_flight(s, HERTZ, 3.0):
        e = nonlinear_energy(st, HERTZ)
        assert e <= e_prev + 1e-11
        e_prev = e


def test_energy_rate_matches_damping_law():
    """dE/dt = -2 mu xidot^2 |xi|^b, checked per step via the trapezoid rule."""
    p = HERTZ
    s = BallState(0.0, 0.8, 0.1, 2.0, -0.05)
    worst = 0.0
    while s.t < 3.0:
        _, _, xi0, xid0 = to_cm(s)
        e0 = nonlinear_energy(s, p)
        s1, h, _ = nonlinear_flight_step(s, p, min(0.004, 3.0 - s.t))
        _, _, xi1, xid1 = to_cm(s1)
        e1 = nonlinear_energy(s1, p)
        r0 = -2.0 * p.mu * xid0 * xid0 * abs(xi0) ** p.b
        r1 = -2.0 * p.mu * xid1 * xid1 * abs(xi1) ** p.b
        worst = max(worst, abs((e1 - e0) / h - 0.5 * (r0 + r1)))
        s = s1
    assert worst < 5e-7


# ------------------------------------------------------------------ contacts

def test_contact_matches_reference_integrator():
    p = HERTZ

    def rhs(t, u):
        psi, psidot, xi, xidot = u
        axi = abs(xi)
        return [
            psidot,
            -p.gamma,
            xidot,
            -p.rho * xi * axi ** p.a - 2.0 * p.mu * xidot * axi ** p.b,
        ]

    def hit(t, u):
        return u[0] - u[2]

    hit.terminal = True
    hit.direction = -1.0

    for s0 in (
        BallState(0.0, 0.8, 0.1, 2.0, -0.05),
        BallState(0.0, 2.5, 0.0, 3.6, 0.1),
    ):
        sol = solve_ivp(
            rhs,
            (0.0, 200.0),
            list(to_cm(s0)),
            method="DOP853",
            rtol=1e-12,
            atol=1e-14,
            events=hit,
        )
        tau_ref = sol.t_events[0][0]
        tau, sc = nonlinear_find_contact(s0, p, EngineConfig())
        assert tau == pytest.approx(tau_ref, abs=1e-9)
        assert sc.x == 0.0
        assert sc.xdot < 0.0


def test_contact_reduces_to_linear_engine():
    from softbounce.engine import find_next_contact

    for s0 in (
        BallState(0.0, 0.5, 0.3, 1.8, -0.2),
        BallState(0.0, 6.0, 0.0, 7.2, 0.0),
    ):
        tau, _ = nonlinear_find_contact(s0, REDUCED, EngineConfig())
        f = build_flight(s0, LIN)
        tau_lin, _ = find_next_contact(f, LIN, EngineConfig())
        assert tau == pytest.approx(tau_lin, abs=1e-9)


def test_no_contact_within_budget():
    s = BallState(0.0, 1.0, 0.0, 2.0, 0.0)
    with pytest.raises(NoContact) as exc:
        nonlinear_find_contact(s, HERTZ, EngineConfig(t_max=0.1))
    assert exc.value.tau == pytest.approx(0.1, rel=0.2)
    assert exc.value.state.x > 0.0


def test_find_contact_validation():
    with pytest.raises(ValueError):
        nonlinear_find_contact(
            BallState(0.0, -1.0, 0.0, 0.5, 0.0), HERTZ, EngineConfig()
        )


# ----------------------------------------------------------------- full runs

def test_run_reduces_to_linear_engine():
    """Fifty impacts of the reduced variant against the event-driven engine."""
    ic = BallState(0.0, 1.0, 0.0, 2.0, 0.0)
    ra = run_nonlinear(ic, REDUCED, EngineConfig(max_impacts=50))
    rb = run_simulation(ic, LIN, EngineConfig(max_impacts=50))
    assert len(ra.events) == len(rb.events) == 50
    for a, b in zip(ra.events, rb.events):
        assert a.t == pytest.approx(b.t, abs=1e-7)
        assert a.xdot_post == pytest.approx(b.xdot_post, abs=1e-7)


def test_run_bookkeeping():
    ic = BallState(0.0, 1.0, 0.0, 2.0, 0.0)
    r = run_nonlinear(ic, HERTZ, EngineConfig(max_impacts=40))
    assert r.termination == IMPACT_LIMIT
    assert [e.n for e in r.events] == list(range(40))
    energies = [e.energy for e in r.events]
    assert all(b < a for a, b in zip(energies, energies[1:]))
    assert all(e.xdot_pre < 0.0 < e.xdot_post for e in r.events)
    times = [e.t for e in r.events]
    assert all(b > a for a, b in zip(times, times[1:]))


def test_run_time_limit():
    r = run_nonlinear(
        BallState(0.0, 1.0, 0.0, 2.0, 0.0), HERTZ, EngineConfig(t_max=0.1)
    )
    assert r.termination == TIME_LIMIT
    assert r.events == []
    assert r.final_state.t == pytest.approx(0.1, rel=0.2)


def test_run_tau_floor():
    r = run_nonlinear(
        BallState(0.0, 1.0, 0.0, 2.0, 0.0),
        REDUCED,
        EngineConfig(max_impacts=10_000, tau_floor=0.5),
    )
    assert r.termination == ASYMPTOTIC_FLOOR
    assert r.asymptotics is None
    assert r.events[-1].tau < 0.5


def test_run_immediate_impact_and_departure():
    hit = run_nonlinear(
        BallState(0.0, 0.0, -0.01, 1.0, 0.0), HERTZ, EngineConfig(max_impacts=3)
    )
    assert hit.events[0].t == 0.0
    assert hit.events[0].xdot_post == 0.01
    leave = run_nonlinear(
        BallState(0.0, 0.0, 0.5, 1.5, 0.0), HERTZ, EngineConfig(max_impacts=2)
    )
    assert leave.events[0].t > 0.0


def test_run_rejects_resting_start():
    with pytest.raises(DegenerateContact):
        run_nonlinear(BallState(0.0, 0.0, 0.0, 1.0, 0.0), HERTZ, EngineConfig())


# --------------------------------------------------------------- asymptotics

def test_hertz_rebound_loss_coefficient():
    xi_star = nonlinear_equilibrium_xi(HERTZ)
    ic = BallState(0.0, 0.0, -0.01, 1.0 + 2.0 * xi_star, 0.0)
    r = run_nonlinear(
        ic, HERTZ, EngineConfig(max_impacts=1500, t_max=1e9, tau_floor=0.0)
    )
    assert r.termination == IMPACT_LIMIT
    alpha_hat, alpha_theory = nonlinear_asymptotic_alpha(r, HERTZ)
    assert alpha_theory == pytest.approx(0.7181448966772946, rel=1e-14)
    assert alpha_hat == pytest.approx(alpha_theory, rel=0.02)
    speeds = [e.xdot_post for e in r.events[len(r.events) // 10 :]]
    assert all(b < a for a, b in zip(speeds, speeds[1:]))


def test_reduced_loss_coefficient_is_linear_rate():
    """With unit laws the loss coefficient must come out at mu/(3 gamma)."""
    ic = BallState(0.0, 1.0, 0.0, 2.0, 0.0)
    r = run_simulation(
        ic, LIN, EngineConfig(max_impacts=4000, t_max=1e9, tau_floor=0.0)
    )
    alpha_hat, alpha_theory = nonlinear_asymptotic_alpha(r, REDUCED)
    assert alpha_theory == pytest.approx(10.0 / 3.0, rel=1e-15)
    assert alpha_hat == pytest.approx(alpha_theory, rel=1e-2)


def test_short_tail_rejected():
    ic = BallState(0.0, 1.0, 0.0, 2.0, 0.0)
    r = run_nonlinear(ic, HERTZ, EngineConfig(max_impacts=100))
    with pytest.raises(InsufficientTail):
        nonlinear_asymptotic_alpha(r, HERTZ)
