"""Persistent-contact phase: closed form, onset rules, detachment search."""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from softbounce.core import BallState, ModelParams, energy, floor_force
from softbounce.sticky import (
    DetachmentResult,
    NotStickyOnset,
    build_sticky,
    contact_time_scale,
    eval_sticky,
    find_detachment,
    min_duration_check,
    sticky_force,
)

BASE = ModelParams(gamma=0.01, mu=0.1)


def onset_state(p, ydot, t=0.0):
    # zero floor force: y = 1 + 2*gamma - 2*mu*ydot
    return BallState(t=t, x=0.0, xdot=0.0, y=1.0 + 2.0 * p.gamma - 2.0 * p.mu * ydot, ydot=ydot)


def contact_oracle(ss, tau, rtol=1e-13, atol=1e-15):
    """Integrate z'' + mu z' + z/2 = 0 independently of the closed form."""
    mu = ss.params.mu

    def rhs(t, u):
        return [u[1], -mu * u[1] - 0.5 * u[0]]

    sol = solve_ivp(rhs, (0.0, tau), [ss.z0, ss.zdot0], method="DOP853",
                    rtol=rtol, atol=atol, dense_output=True)
    assert sol.success
    return sol.sol


# ---------------------------------------------------------------- closed form

@pytest.mark.parametrize("mu", [0.0, 0.1, 1.0, 1.4, math.sqrt(2.0), 1.5, 3.0])
def test_closed_form_matches_ode_oracle(mu):
    p = ModelParams(gamma=0.01, mu=mu)
    s = BallState(t=2.0, x=0.0, xdot=0.0, y=1.0, ydot=-0.21)
    ss = build_sticky(s, p, require_onset=False)
    dense = contact_oracle(ss, 25.0)
    for tau in np.linspace(0.0, 25.0, 113):
        z_ref, zdot_ref = dense(tau)
        st = eval_sticky(ss, float(tau))
        assert st.t == pytest.approx(2.0 + tau, abs=1e-12)
        assert st.x == 0.0 and st.xdot == 0.0
        assert st.y - ss.y_rest == pytest.approx(z_ref, abs=1e-10)
        assert st.ydot == pytest.approx(zdot_ref, abs=1e-10)


def test_force_agrees_with_floor_force_of_state():
    ss = build_sticky(BallState(0.0, 0.0, 0.0, 1.01, -0.15), BASE, require_onset=False)
    for tau in np.linspace(0.0, 30.0, 77):
        st = eval_sticky(ss, float(tau))
        assert sticky_force(ss, float(tau)) == pytest.approx(floor_force(st, BASE), abs=1e-13)


def test_contact_energy_and_total_energy_never_increase():
    ss = build_sticky(onset_state(BASE, -0.2), BASE)
    taus = np.linspace(0.0, 40.0, 600)
    ec = [ss.contact_energy(float(t)) for t in taus]
    es = [energy(eval_sticky(ss, float(t)), BASE) for t in taus]
    assert all(b <= a + 1e-12 for a, b in zip(ec, ec[1:]))
    assert all(b <= a + 1e-12 for a, b in zip(es, es[1:]))


def test_negative_offsets_rejected():
    ss = build_sticky(onset_state(BASE, -0.1), BASE)
    with pytest.raises(ValueError):
        eval_sticky(ss, -1e-9)
    with pytest.raises(ValueError):
        sticky_force(ss, -0.5)


# ---------------------------------------------------------------- onset rules

def test_onset_validation():
    with pytest.raises(NotStickyOnset):
        build_sticky(BallState(0.0, 0.1, 0.0, 1.0, -0.1), BASE)
    with pytest.raises(NotStickyOnset):
        build_sticky(BallState(0.0, 0.0, 1e-3, 1.0, -0.1), BASE)
    # force pulling up is rejected even when resuming mid-phase
    with pytest.raises(NotStickyOnset):
        build_sticky(BallState(0.0, 0.0, 0.0, 1.2, 0.0), BASE, require_onset=False)
    # nonzero force is no onset, but is a valid mid-phase state
    resting = BallState(0.0, 0.0, 0.0, 1.0 - 2.0 * BASE.gamma, 0.0)
    with pytest.raises(NotStickyOnset):
        build_sticky(resting, BASE)
    build_sticky(resting, BASE, require_onset=False)
    # zero force but upper mass not pressing down
    fast_up = onset_state(BASE, 4.0 * BASE.gamma * BASE.mu + 1e-3)
    with pytest.raises(NotStickyOnset):
        build_sticky(fast_up, BASE)


# ---------------------------------------------------------- detachment search

def test_base_onset_detachment_frozen():
    ss = build_sticky(onset_state(BASE, -0.1), BASE)
    res = find_detachment(ss)
    assert res.tau == pytest.approx(5.340842984059446, abs=1e-9)
    assert not res.certified_never
    f, fdot, _ = ss.probe(res.tau)
    assert abs(f) < 1e-11
    assert fdot == pytest.approx(0.03697862998301911, abs=1e-9)
    st = eval_sticky(ss, res.tau)
    assert st.y == pytest.approx(1.0044085480068217, abs=1e-9)
    assert st.ydot == pytest.approx(0.0779572599660412, abs=1e-9)


def test_base_detachment_against_independent_root_search():
    ss = build_sticky(onset_state(BASE, -0.1), BASE)
    res = find_detachment(ss)
    # brute-force bracket of the first upward crossing, refined by brentq
    # (skip tau = 0, where the onset force is zero only to roundoff)
    taus = np.arange(1e-3, 20.0, 1e-3)
    vals = np.array([ss.force(float(t)) for t in taus])
    i = int(np.argmax(vals > 1e-12))
    assert i > 0
    ref = brentq(ss.force, taus[i - 1], taus[i], xtol=1e-13)
    assert res.tau == pytest.approx(ref, abs=1e-9)


def test_force_stays_nonpositive_until_detachment():
    ss = build_sticky(onset_state(BASE, -0.1), BASE)
    tau_d = find_detachment(ss).tau
    for tau in np.linspace(0.0, tau_d * (1.0 - 1e-9), 400):
        assert ss.force(float(tau)) <= 1e-12


def test_barely_pressing_onset_never_detaches():
    ss = build_sticky(onset_state(BASE, 4.0 * BASE.gamma * BASE.mu - 1e-4), BASE)
    res = find_detachment(ss)
    assert res == DetachmentResult(tau=None, certified_never=True)


def test_stronger_damping_traps_the_contact():
    p = ModelParams(gamma=0.1, mu=0.1)
    ss = build_sticky(onset_state(p, -0.1), p)
    assert find_detachment(ss) == DetachmentResult(tau=None, certified_never=True)


def test_overdamped_mid_phase_certifies():
    p = ModelParams(gamma=0.01, mu=2.0)
    ss = build_sticky(BallState(0.0, 0.0, 0.0, 1.5, -0.3), p, require_onset=False)
    res = find_detachment(ss)
    assert res.tau is None and res.certified_never


def test_detachment_duration_family():
    finite, never = [], 0
    for ydot in np.linspace(-0.5, 4.0 * BASE.gamma * BASE.mu - 1e-6, 40):
        ss = build_sticky(onset_state(BASE, float(ydot)), BASE)
        res = find_detachment(ss)
        if res.tau is None:
            assert res.certified_never
            never += 1
        else:
            _, fdot, _ = ss.probe(res.tau)
            assert fdot > 1e-10
            finite.append(res.tau)
    assert never == 3
    assert len(finite) == 37
    assert 4.6 < min(finite) and max(finite) < 6.9


def test_undamped_detachment_has_analytic_time():
    # mu = 0: z = z0 cos(omega tau), force crosses 2*gamma*... at z = 4*gamma
    p = ModelParams(gamma=0.01, mu=0.0)
    z0 = -6.0 * p.gamma
    ss = build_sticky(BallState(0.0, 0.0, 0.0, 1.0 - 2.0 * p.gamma + z0, 0.0), p,
                      require_onset=False)
    res = find_detachment(ss)
    assert res.tau == pytest.approx(math.sqrt(2.0) * math.acos(-2.0 / 3.0), abs=1e-9)


def test_undamped_short_horizon_cannot_certify():
    p = ModelParams(gamma=0.01, mu=0.0)
    z0 = -6.0 * p.gamma
    ss = build_sticky(BallState(0.0, 0.0, 0.0, 1.0 - 2.0 * p.gamma + z0, 0.0), p,
                      require_onset=False)
    res = find_detachment(ss, horizon=0.01 * contact_time_scale(p))
    assert res.tau is None
    assert not res.certified_never


def test_undamped_small_amplitude_certified_immediately():
    p = ModelParams(gamma=0.01, mu=0.0)
    z0 = -3.0 * p.gamma  # peak force z0/2 + ... stays below zero
    ss = build_sticky(BallState(0.0, 0.0, 0.0, 1.0 - 2.0 * p.gamma + z0, 0.0), p,
                      require_onset=False)
    assert find_detachment(ss) == DetachmentResult(tau=None, certified_never=True)


def test_min_duration_check():
    ss = build_sticky(onset_state(BASE, -0.1), BASE)
    assert min_duration_check(ss, floor=1.0) == pytest.approx(5.340842984059446, abs=1e-9)
    with pytest.raises(ValueError):
        min_duration_check(ss, floor=10.0)
    trapped = build_sticky(onset_state(BASE, 4.0 * BASE.gamma * BASE.mu - 1e-4), BASE)
    with pytest.raises(ValueError):
        min_duration_check(trapped)


def test_contact_time_scale_values():
    assert contact_time_scale(ModelParams(0.01, 0.1)) == pytest.approx(8.908063943688273, rel=1e-13)
    assert contact_time_scale(ModelParams(0.3, 0.0)) == pytest.approx(4.0 * math.pi / math.sqrt(2.0), rel=1e-13)
    assert contact_time_scale(ModelParams(0.01, 1.5)) == pytest.approx(2.0, rel=1e-13)
    assert contact_time_scale(ModelParams(0.01, 2.0)) == pytest.approx(2.0 + math.sqrt(2.0), rel=1e-13)
