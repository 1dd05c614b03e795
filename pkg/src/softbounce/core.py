"""State, parameters and pointwise diagnostics for the deformable bouncing ball.

The ball is two equal point masses joined by a damped linear spring, falling
onto a rigid floor.  Everything here is dimensionless: lengths are measured in
units of the spring rest length, time in units of the free two-mass vibration
scale, so exactly two parameters remain (``gamma``, the weight-to-spring-force
ratio, and ``mu``, the damping ratio).

``x`` is the height of the lower mass, ``y`` the height of the upper one.  The
floor constraint is ``x >= 0``.  The center-of-mass / internal split

    psi = (y + x - 1) / 2        xi = (y - x - 1) / 2

decouples free flight: ``psi`` is ballistic, ``xi`` is a damped oscillator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Root finders leave residues of order 1e-13 on contact states; the floor
# constraint is therefore checked against a slightly negative tolerance.
FLOOR_TOL = 1e-12


class ConstraintViolation(ValueError):
    """A state sits below the floor by more than the absorbing tolerance."""


@dataclass(frozen=True, slots=True)
class ModelParams:
    """Dimensionless parameters of the linear two-mass ball.

    Parameters
    ----------
    gamma : float
        Weight of one mass relative to the peak elastic force, ``> 0``.
    mu : float
        Internal damping ratio, ``>= 0``.  Zero is the undamped edge case,
        kept admissible because conservation checks rely on it.
    """

    gamma: float
    mu: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.gamma) and self.gamma > 0.0):
            raise ValueError(f"gamma must be a positive finite number, got {self.gamma}")
        if not (math.isfinite(self.mu) and self.mu >= 0.0):
            raise ValueError(f"mu must be a non-negative finite number, got {self.mu}")

    @property
    def physical(self) -> bool:
        """True when the resting spring stays shorter than compressed-to-zero.

        gamma >= 1/2 would push the static spring length below zero; such
        parameter sets are accepted for numerical experiments but flagged.
        """
        return self.gamma < 0.5


@dataclass(frozen=True, slots=True)
class BallState:
    """Instantaneous state ``(t, x, xdot, y, ydot)`` of the two masses."""

    t: float
    x: float
    xdot: float
    y: float
    ydot: float

    @property
    def psi(self) -> float:
        return 0.5 * (self.y + self.x - 1.0)

    @property
    def xi(self) -> float:
        return 0.5 * (self.y - self.x - 1.0)

    @property
    def psidot(self) -> float:
        return 0.5 * (self.ydot + self.xdot)

    @property
    def xidot(self) -> float:
        return 0.5 * (self.ydot - self.xdot)


def to_cm(s: BallState) -> tuple[float, float, float, float]:
    """Return ``(psi, psidot, xi, xidot)`` for a state."""
    return s.psi, s.psidot, s.xi, s.xidot


def from_cm(t: float, psi: float, psidot: float, xi: float, xidot: float) -> BallState:
    """Build a state from center-of-mass / internal coordinates."""
    return BallState(
        t=t,
        x=psi - xi,
        xdot=psidot - xidot,
        y=psi + xi + 1.0,
        ydot=psidot + xidot,
    )


def validate_above_floor(s: BallState) -> None:
    """Raise :class:`ConstraintViolation` when ``x`` is below ``-FLOOR_TOL``."""
    if s.x < -FLOOR_TOL:
        raise ConstraintViolation(f"lower mass below the floor: x = {s.x}")


def energy(s: BallState, p: ModelParams) -> float:
    """Total mechanical energy, continuous across impacts.

    E = xidot^2/2 + xi^2/2 + psidot^2/2 + gamma*psi.  Along any motion it is
    non-increasing; the internal damper dissipates at rate ``2*mu*xidot^2``.
    """
    xi = s.xi
    xidot = s.xidot
    psidot = s.psidot
    return 0.5 * (xidot * xidot + xi * xi + psidot * psidot) + p.gamma * s.psi


def dissipation_rate(s: BallState, p: ModelParams) -> float:
    """Instantaneous energy loss rate ``2*mu*xidot^2`` during free flight."""
    xidot = s.xidot
    return 2.0 * p.mu * xidot * xidot


def floor_force(s: BallState, p: ModelParams) -> float:
    """Force the flying solution would need from the floor: y/2 + mu*ydot - gamma - 1/2.

    At a contact with ``x = xdot = 0`` this equals the free-flight ``xddot``;
    a sticky phase persists exactly while it is negative.
    """
    return 0.5 * s.y + p.mu * s.ydot - p.gamma - 0.5


def equilibrium_state(p: ModelParams, t: float = 0.0) -> BallState:
    """The rest state: lower mass on the floor, spring compressed by the weight."""
    return BallState(t=t, x=0.0, xdot=0.0, y=1.0 - 2.0 * p.gamma, ydot=0.0)


def equilibrium_energy(p: ModelParams) -> float:
    """Energy of the rest state, ``-gamma^2 / 2``; the global minimum over x >= 0."""
    return -0.5 * p.gamma * p.gamma


def anomaly_energy_barrier(p: ModelParams) -> float:
    """Energy below which grazing and sticky contacts are impossible.

    E_min = gamma^2 (3 - 2 mu^2) / (2 (1 + 2 mu^2)).  Strictly above the rest
    energy for every finite ``mu``; the two meet only in the overdamped limit.
    """
    mu2 = p.mu * p.mu
    g2 = p.gamma * p.gamma
    return g2 * (3.0 - 2.0 * mu2) / (2.0 * (1.0 + 2.0 * mu2))


@dataclass(frozen=True, slots=True)
class CharacteristicTimes:
    """The three intrinsic time scales of the model.

    ``t_fall`` is the ballistic scale of a unit drop, ``t_vibration`` the
    damped internal half-period (undefined at or past critical damping),
    ``t_damping`` the envelope decay time (infinite when undamped).
    """

    t_fall: float
    t_vibration: float | None
    t_damping: float


def characteristic_times(p: ModelParams) -> CharacteristicTimes:
    t_fall = math.sqrt(1.0 / (2.0 * p.gamma))
    if p.mu < 1.0:
        t_vibration = math.pi / math.sqrt(1.0 - p.mu * p.mu)
    else:
        t_vibration = None
    t_damping = 1.0 / p.mu if p.mu > 0.0 else math.inf
    return CharacteristicTimes(t_fall, t_vibration, t_damping)


def spring_fully_compressed(s: BallState) -> bool:
    """Diagnostic flag: the two masses have closed half the rest length (xi <= -1/2).

    The model remains valid past this point mathematically; the flag marks
    where a real ball would have its masses collide.
    """
    return s.xi <= -0.5


def energy_allows_full_compression(e: float, p: ModelParams) -> bool:
    """Diagnostic flag: energy ``e`` suffices to reach full spring compression.

    Initial energies below ``(1 - 4*gamma) / 8`` can never produce xi = -1/2.
    Reported only; never enforced.
    """
    return e >= (1.0 - 4.0 * p.gamma) / 8.0
