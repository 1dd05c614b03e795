"""Closed-form propagation of free flight.

Between contacts the center of mass is ballistic and the internal coordinate
is a damped linear oscillator,

    psi'' = -gamma            xi'' = -xi - 2*mu*xi'

so flight needs no numerical integration.  The oscillator is evaluated through
the basis pair ``C = cos(w*tau)``, ``S = sin(w*tau)/w`` with ``w^2 = 1 - mu^2``,
which are entire in ``w^2``: the same expressions remain well-conditioned
through critical damping (where the textbook distinct-root formulas cancel
catastrophically) and turn into cosh/sinh past it.  The overdamped branch is
written in growth-factored exponentials so nothing overflows at large times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import BallState, ModelParams, validate_above_floor

# Reported regime window around critical damping.
CRITICAL_WINDOW = 1e-6

# Below this |1 - mu^2| the basis switches to its power series; the truncation
# error is ~ (w2*tau^2)^3/720, negligible for any reachable tau.
_SERIES_W2 = 1e-24

# Branch tags for the basis evaluation.
_OSC, _SERIES, _HYP = 0, 1, 2


def select_branch(w2: float) -> tuple[int, float]:
    """Pick the evaluation branch for a stiffness ``w2`` and return (tag, sqrt|w2|)."""
    if w2 > _SERIES_W2:
        return _OSC, math.sqrt(w2)
    if w2 < -_SERIES_W2:
        return _HYP, math.sqrt(-w2)
    return _SERIES, 0.0


def damped_basis(mu: float, w2: float, w: float, branch: int, tau: float) -> tuple[float, float]:
    """Basis pair (e^{-mu tau} C, e^{-mu tau} S) of z'' + 2 mu z' + (mu^2 + w2) z = 0.

    C and S satisfy S' = C, C' = -w2 S with C(0) = 1, S(0) = 0; any solution is
    z = z0 (e C) + (z0' + mu z0)(e S).  Shared by free flight and the contact
    phase, which differ only in ``mu`` and ``w2``.
    """
    if branch == _OSC:
        e = math.exp(-mu * tau)
        wt = w * tau
        return e * math.cos(wt), e * math.sin(wt) / w
    if branch == _HYP:
        st = w * tau
        e1 = math.exp((w - mu) * tau)  # exponent <= 0 whenever w < mu
        e2 = math.exp(-(w + mu) * tau)
        cd = 0.5 * (e1 + e2)
        if st < 0.5:
            # e1 - e2 cancels for small st; sinh is exact there and the
            # product cannot overflow because exp(-mu*tau) shrinks faster.
            sd = math.exp(-mu * tau) * math.sinh(st) / w
        else:
            sd = (e1 - e2) / (2.0 * w)
        return cd, sd
    e = math.exp(-mu * tau)
    q = w2 * tau * tau
    cd = e * (1.0 - 0.5 * q * (1.0 - q / 12.0))
    sd = e * tau * (1.0 - q / 6.0 * (1.0 - q / 20.0))
    return cd, sd


@dataclass(frozen=True, slots=True)
class FlightSolution:
    """Free flight from a fixed origin state, parameterized by the offset tau >= 0."""

    origin: BallState
    params: ModelParams
    regime: str  # "underdamped" | "critical" | "overdamped", labeled by mu
    psi0: float
    psidot0: float
    xi0: float
    xidot0: float
    _b_xi: float  # xidot0 + mu*xi0, S-coefficient of xi
    _b_v: float  # xi0 + mu*xidot0, S-coefficient of -xidot
    _w2: float  # 1 - mu^2
    _w: float  # sqrt(|w2|), 0.0 on the series branch
    _branch: int

    # -- basis -------------------------------------------------------------

    def _basis(self, tau: float) -> tuple[float, float]:
        """Damped basis (e^{-mu tau} C, e^{-mu tau} S) at offset tau."""
        return damped_basis(self.params.mu, self._w2, self._w, self._branch, tau)

    # -- evaluation --------------------------------------------------------

    def xi_xidot(self, tau: float) -> tuple[float, float]:
        cd, sd = self._basis(tau)
        xi = self.xi0 * cd + self._b_xi * sd
        xidot = self.xidot0 * cd - self._b_v * sd
        return xi, xidot

    def x_xdot(self, tau: float) -> tuple[float, float]:
        """Lower-mass height and velocity; the hot path of contact search."""
        cd, sd = self._basis(tau)
        xi = self.xi0 * cd + self._b_xi * sd
        xidot = self.xidot0 * cd - self._b_v * sd
        g = self.params.gamma
        x = self.psi0 + (self.psidot0 - 0.5 * g * tau) * tau - xi
        xdot = self.psidot0 - g * tau - xidot
        return x, xdot

    def state(self, tau: float) -> BallState:
        g = self.params.gamma
        xi, xidot = self.xi_xidot(tau)
        psi = self.psi0 + (self.psidot0 - 0.5 * g * tau) * tau
        psidot = self.psidot0 - g * tau
        return BallState(
            t=self.origin.t + tau,
            x=psi - xi,
            xdot=psidot - xidot,
            y=psi + xi + 1.0,
            ydot=psidot + xidot,
        )

    def x_derivatives(self, tau: float) -> tuple[float, float, float, float]:
        """(x, xdot, xddot, xdddot) at offset tau, all in closed form.

        The higher derivatives come from the equations of motion themselves:
        xddot = -gamma + xi + 2*mu*xidot and xdddot = -2*mu*xi + (1-4*mu^2)*xidot.
        The upper-mass counterparts follow as yddot = -2*gamma - xddot and
        ydddot = -xdddot because the center of mass has no jerk.
        """
        g = self.params.gamma
        mu = self.params.mu
        xi, xidot = self.xi_xidot(tau)
        psi = self.psi0 + (self.psidot0 - 0.5 * g * tau) * tau
        psidot = self.psidot0 - g * tau
        x = psi - xi
        xdot = psidot - xidot
        xddot = -g + xi + 2.0 * mu * xidot
        xdddot = -2.0 * mu * xi + (1.0 - 4.0 * mu * mu) * xidot
        return x, xdot, xddot, xdddot


def build_flight(s: BallState, p: ModelParams) -> FlightSolution:
    """Construct the closed-form flight starting at state ``s``.

    The origin must satisfy the floor constraint; whether it actually stays
    airborne is the contact searcher's business, not checked here.
    """
    validate_above_floor(s)
    mu = p.mu
    w2 = 1.0 - mu * mu
    branch, w = select_branch(w2)
    if abs(mu - 1.0) < CRITICAL_WINDOW:
        regime = "critical"
    elif mu < 1.0:
        regime = "underdamped"
    else:
        regime = "overdamped"
    xi0 = s.xi
    xidot0 = s.xidot
    return FlightSolution(
        origin=s,
        params=p,
        regime=regime,
        psi0=s.psi,
        psidot0=s.psidot,
        xi0=xi0,
        xidot0=xidot0,
        _b_xi=xidot0 + mu * xi0,
        _b_v=xi0 + mu * xidot0,
        _w2=w2,
        _w=w,
        _branch=branch,
    )


def eval_flight(f: FlightSolution, tau: float) -> BallState:
    """State at offset ``tau >= 0`` from the flight origin."""
    if tau < 0.0:
        raise ValueError(f"flight offsets are forward only, got tau = {tau}")
    return f.state(tau)


def eval_flight_derivatives(f: FlightSolution, tau: float) -> tuple[float, float, float, float]:
    """Analytic (x, xdot, xddot, xdddot) at offset ``tau``, for classification and jump checks."""
    if tau < 0.0:
        raise ValueError(f"flight offsets are forward only, got tau = {tau}")
    return f.x_derivatives(tau)
