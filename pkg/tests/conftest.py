"""Shared oracles for the test suite.

Everything here is deliberately independent of the package's own evaluation
paths: the ODE oracle integrates the raw second-order equations of motion in
physical (x, y) coordinates, and the extended-precision helpers recompute
closed forms with mpmath from first principles.
"""

import math

import mpmath
import numpy as np
from scipy.integrate import solve_ivp


def flight_rhs(t, u, gamma, mu):
    """Raw equations of motion for the two masses in physical coordinates."""
    x, xd, y, yd = u
    xdd = -gamma - 0.5 + 0.5 * y + mu * yd - mu * xd - 0.5 * x
    ydd = -gamma + 0.5 + 0.5 * x + mu * xd - mu * yd - 0.5 * y
    return [xd, xdd, yd, ydd]


def integrate_flight(state, p, tau, rtol=1e-13, atol=1e-15):
    """High-accuracy DOP853 integration of a free flight over offset tau."""
    sol = solve_ivp(
        flight_rhs,
        (0.0, tau),
        [state.x, state.xdot, state.y, state.ydot],
        args=(p.gamma, p.mu),
        method="DOP853",
        rtol=rtol,
        atol=atol,
    )
    assert sol.success
    return sol.y[:, -1]


def mp_oscillator(xi0, xidot0, mu, tau, dps=50):
    """Damped-oscillator value and velocity via distinct characteristic roots.

    Evaluated in extended precision, so the distinct-root formula is usable
    arbitrarily close to critical damping (where it cancels in doubles).
    Exact critical damping falls back to the (A + B tau) e^-tau form.
    """
    with mpmath.workdps(dps):
        mu_ = mpmath.mpf(mu)
        xi0_ = mpmath.mpf(xi0)
        xidot0_ = mpmath.mpf(xidot0)
        tau_ = mpmath.mpf(tau)
        disc = mu_ * mu_ - 1
        if disc == 0:
            a = xi0_
            b = xidot0_ + xi0_
            e = mpmath.e ** (-tau_)
            xi = (a + b * tau_) * e
            xid = (b - a - b * tau_) * e
            return float(xi), float(xid)
        r = mpmath.sqrt(disc)
        l1 = -mu_ + r
        l2 = -mu_ - r
        c1 = (xidot0_ - l2 * xi0_) / (l1 - l2)
        c2 = (l1 * xi0_ - xidot0_) / (l1 - l2)
        e1 = mpmath.e ** (l1 * tau_)
        e2 = mpmath.e ** (l2 * tau_)
        # below critical damping the roots are a conjugate pair; the sum is real
        xi = mpmath.re(c1 * e1 + c2 * e2)
        xid = mpmath.re(c1 * l1 * e1 + c2 * l2 * e2)
        return float(xi), float(xid)


def mp_energy(state, p, dps=50):
    """Mechanical energy recomputed from raw fields in extended precision."""
    with mpmath.workdps(dps):
        x = mpmath.mpf(state.x)
        y = mpmath.mpf(state.y)
        xd = mpmath.mpf(state.xdot)
        yd = mpmath.mpf(state.ydot)
        psi = (y + x - 1) / 2
        xi = (y - x - 1) / 2
        psid = (yd + xd) / 2
        xid = (yd - xd) / 2
        e = (xid * xid + xi * xi + psid * psid) / 2 + mpmath.mpf(p.gamma) * psi
        return float(e)


def first_contact_by_dense_sampling(f, tau_hi, coarse=1e-3, fine=1e-6, tol=1e-12):
    """First zero of x(tau) on (0, tau_hi] by brute-force grid refinement.

    Independent of the engine's bracketing and Newton logic: scan a coarse
    grid for the first sign change, refine the cell on a fine grid, then
    plain bisection.  Vectorized closed-form evaluation keeps it affordable.
    """

    def x_of(taus):
        return np.array([f.x_xdot(t)[0] for t in taus])

    lo = None
    n = max(int(tau_hi / coarse), 8)
    grid = np.linspace(coarse * 1e-3, tau_hi, n)
    vals = x_of(grid)
    idx = np.flatnonzero((vals[:-1] > 0.0) & (vals[1:] <= 0.0))
    assert idx.size, "no sign change on the coarse grid"
    a, b = grid[idx[0]], grid[idx[0] + 1]
    sub = np.linspace(a, b, max(int((b - a) / fine), 64))
    svals = x_of(sub)
    jdx = np.flatnonzero((svals[:-1] > 0.0) & (svals[1:] <= 0.0))
    assert jdx.size
    a, b = sub[jdx[0]], sub[jdx[0] + 1]
    while b - a > tol:
        m = 0.5 * (a + b)
        if f.x_xdot(m)[0] > 0.0:
            a = m
        else:
            b = m
    return 0.5 * (a + b)
