"""Persistent floor contact of the lower mass.

When the lower mass arrives at the floor with negligible speed while the net
floor force pins it down, the system enters a phase with x = 0, xdot = 0 held
and only the upper mass moving.  Writing z = y - y_rest with the contact rest
height y_rest = 1 - 2*gamma, the upper mass obeys

    z'' + mu*z' + z/2 = 0

which is the same damped-oscillator form as flight with half the damping, so
it shares the flight module's basis evaluation.  The floor force on the lower
mass is F = z/2 + mu*z' - 2*gamma; the phase persists while F <= 0 and ends at
the first time F crosses zero with positive slope, after which free flight
resumes (cubically in time: x, xdot and xddot all vanish at detachment).

Contact can also persist forever.  The contact energy z'^2/2 + z^2/4 never
increases, which bounds every future force value; when that bound stays below
zero the absence of detachment is certified, not merely observed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import BallState, ModelParams
from .flight import damped_basis, select_branch


class NotStickyOnset(ValueError):
    """The given state does not start (or continue) a persistent contact."""


@dataclass(frozen=True, slots=True)
class StickySolution:
    """Closed-form contact phase from an onset state, parameterized by tau >= 0."""

    onset: BallState
    params: ModelParams
    y_rest: float
    z0: float
    zdot0: float
    _b_z: float  # zdot0 + (mu/2) z0, S-coefficient of z
    _b_v: float  # z0/2 + (mu/2) zdot0, S-coefficient of -zdot
    _w2: float  # 1/2 - mu^2/4
    _w: float
    _branch: int

    def z_zdot(self, tau: float) -> tuple[float, float]:
        cd, sd = damped_basis(0.5 * self.params.mu, self._w2, self._w, self._branch, tau)
        z = self.z0 * cd + self._b_z * sd
        zdot = self.zdot0 * cd - self._b_v * sd
        return z, zdot

    def state(self, tau: float) -> BallState:
        z, zdot = self.z_zdot(tau)
        return BallState(
            t=self.onset.t + tau,
            x=0.0,
            xdot=0.0,
            y=self.y_rest + z,
            ydot=zdot,
        )

    def force(self, tau: float) -> float:
        """Floor force on the held lower mass; nonpositive throughout the phase."""
        z, zdot = self.z_zdot(tau)
        p = self.params
        return 0.5 * z + p.mu * zdot - 2.0 * p.gamma

    def probe(self, tau: float) -> tuple[float, float, float]:
        """(force, force slope, contact energy) at offset tau, one basis evaluation."""
        z, zdot = self.z_zdot(tau)
        p = self.params
        f = 0.5 * z + p.mu * zdot - 2.0 * p.gamma
        fdot = (0.5 - p.mu * p.mu) * zdot - 0.5 * p.mu * z
        ec = 0.5 * zdot * zdot + 0.25 * z * z
        return f, fdot, ec

    def contact_energy(self, tau: float) -> float:
        z, zdot = self.z_zdot(tau)
        return 0.5 * zdot * zdot + 0.25 * z * z


def build_sticky(
    s: BallState,
    p: ModelParams,
    *,
    force_tol: float = 1e-8,
    require_onset: bool = True,
) -> StickySolution:
    """Construct the contact phase starting at state ``s``.

    With ``require_onset`` the state must sit at a genuine onset: lower mass at
    rest on the floor, floor force zero to within ``force_tol``, and the upper
    mass pressing down (ydot < 4*gamma*mu, equivalent to a strictly negative
    force slope).  With ``require_onset=False`` a strictly negative force is
    accepted too, so a simulation can resume from the middle of a phase.
    """
    if abs(s.x) > 1e-9:
        raise NotStickyOnset(f"contact needs the lower mass on the floor, got x = {s.x}")
    if abs(s.xdot) > 1e-8:
        raise NotStickyOnset(f"contact needs the lower mass at rest, got xdot = {s.xdot}")
    g = p.gamma
    mu = p.mu
    y_rest = 1.0 - 2.0 * g
    z0 = s.y - y_rest
    zdot0 = s.ydot
    f0 = 0.5 * z0 + mu * zdot0 - 2.0 * g
    if f0 > force_tol:
        raise NotStickyOnset(f"floor force {f0} is pulling the lower mass up")
    if require_onset:
        if abs(f0) > force_tol:
            raise NotStickyOnset(f"onset needs zero floor force, got {f0}")
        if zdot0 >= 4.0 * g * mu:
            raise NotStickyOnset(
                f"onset needs the upper mass pressing down (ydot < {4.0 * g * mu}), got {zdot0}"
            )
    w2 = 0.5 - 0.25 * mu * mu
    branch, w = select_branch(w2)
    return StickySolution(
        onset=s,
        params=p,
        y_rest=y_rest,
        z0=z0,
        zdot0=zdot0,
        _b_z=zdot0 + 0.5 * mu * z0,
        _b_v=0.5 * z0 + 0.5 * mu * zdot0,
        _w2=w2,
        _w=w,
        _branch=branch,
    )


def eval_sticky(ss: StickySolution, tau: float) -> BallState:
    """State at offset ``tau >= 0`` from the contact onset."""
    if tau < 0.0:
        raise ValueError(f"contact offsets are forward only, got tau = {tau}")
    return ss.state(tau)


def sticky_force(ss: StickySolution, tau: float) -> float:
    """Floor force at offset ``tau >= 0``."""
    if tau < 0.0:
        raise ValueError(f"contact offsets are forward only, got tau = {tau}")
    return ss.force(tau)


def contact_time_scale(p: ModelParams) -> float:
    """Oscillation period of the held phase, or its slowest decay time past mu^2 = 2."""
    mm = p.mu * p.mu
    if mm < 2.0:
        return 4.0 * math.pi / math.sqrt(2.0 - mm)
    return p.mu + math.sqrt(mm - 2.0)


@dataclass(frozen=True, slots=True)
class DetachmentResult:
    """Outcome of the detachment search.

    ``tau`` is the offset of the first upward force crossing, or None.  When
    ``tau`` is None, ``certified_never`` tells whether the contact-energy bound
    proved no future crossing exists (as opposed to the horizon running out).
    """

    tau: float | None
    certified_never: bool


# Force slopes smaller than this at a refined zero are treated as tangential
# touches (the force curves back down, curvature -gamma) rather than detachment.
_SLOPE_TOL = 1e-10

# Offset to step past a tangential touch before resuming the scan.
_TOUCH_SKIP = 1e-9


def _refine_force_zero(ss: StickySolution, lo: float, hi: float) -> float:
    """First zero of the force in (lo, hi], given force(lo) <= 0 < force(hi)."""
    force = ss.force
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        if force(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    tau = 0.5 * (lo + hi)
    for _ in range(60):
        f, fdot, _ = ss.probe(tau)
        if f > 0.0:
            hi = tau
        else:
            lo = tau
        if hi - lo <= 1e-13 * max(1.0, hi):
            break
        if fdot != 0.0:
            cand = tau - f / fdot
            if not lo < cand < hi:
                cand = 0.5 * (lo + hi)
        else:
            cand = 0.5 * (lo + hi)
        if cand == tau:
            break
        tau = cand
    return tau


def _refine_force_max(ss: StickySolution, lo: float, hi: float) -> float:
    """Local maximum of the force in [lo, hi], given slope(lo) > 0 >= slope(hi)."""
    for _ in range(80):
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        if ss.probe(mid)[1] > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_detachment(
    ss: StickySolution,
    *,
    horizon: float | None = None,
    step_divisor: int = 64,
) -> DetachmentResult:
    """Search for the first force zero with positive slope.

    Scans at a fraction of the contact time scale, refining both sign changes
    and interior force maxima so a narrow positive excursion between samples is
    not stepped over.  Returns early with a certificate when the decaying
    contact-energy bound sqrt(e)*(1 + mu*sqrt(2)) stays below 2*gamma, which
    caps every future force value below zero.
    """
    p = ss.params
    g = p.gamma
    mu = p.mu
    t_scale = contact_time_scale(p)
    periodic = mu == 0.0
    if horizon is None:
        # Underdamped decay needs ~1/mu per e-folding of contact energy; the
        # overdamped slow mode needs ~t_scale.  Generous either way.
        horizon = 1.25 * t_scale if periodic else max(50.0 / mu, 30.0 * t_scale)
    step = t_scale / step_divisor
    f_bound = 1.0 + mu * math.sqrt(2.0)

    tau_a = 0.0
    f_a, fd_a, ec_a = ss.probe(tau_a)
    if math.sqrt(ec_a) * f_bound < 2.0 * g:
        return DetachmentResult(tau=None, certified_never=True)
    while tau_a < horizon:
        tau_b = min(tau_a + step, horizon)
        f_b, fd_b, ec_b = ss.probe(tau_b)
        if f_b > 0.0:
            tau = _refine_force_zero(ss, tau_a, tau_b)
            _, fdot, _ = ss.probe(tau)
            if fdot > _SLOPE_TOL:
                return DetachmentResult(tau=tau, certified_never=False)
            # Tangential touch: the force grazes zero and curves back down.
            tau_a = tau + _TOUCH_SKIP
            f_a, fd_a, ec_a = ss.probe(tau_a)
            continue
        if fd_a > 0.0 >= fd_b:
            # Passed a force maximum between samples; it may poke above zero.
            tau_m = _refine_force_max(ss, tau_a, tau_b)
            f_m, _, _ = ss.probe(tau_m)
            if f_m > 0.0:
                tau = _refine_force_zero(ss, tau_a, tau_m)
                _, fdot, _ = ss.probe(tau)
                if fdot > _SLOPE_TOL:
                    return DetachmentResult(tau=tau, certified_never=False)
                tau_a = tau + _TOUCH_SKIP
                f_a, fd_a, ec_a = ss.probe(tau_a)
                continue
        if math.sqrt(ec_b) * f_bound < 2.0 * g:
            return DetachmentResult(tau=None, certified_never=True)
        tau_a, f_a, fd_a, ec_a = tau_b, f_b, fd_b, ec_b
    # Without damping the force is exactly periodic, so one clean period is
    # already a proof; otherwise the horizon simply ran out.
    covered_period = periodic and horizon >= t_scale * (1.0 - 1e-12)
    return DetachmentResult(tau=None, certified_never=covered_period)


def min_duration_check(ss: StickySolution, floor: float = 0.0) -> float:
    """Detachment offset, raising if the phase never ends or is not longer than ``floor``."""
    res = find_detachment(ss)
    if res.tau is None:
        raise ValueError("contact phase has no finite detachment")
    if res.tau <= floor:
        raise ValueError(f"contact duration {res.tau} is not above the floor {floor}")
    return res.tau
