"""Rigid-ball reference models and the scalar iteration toolbox.

The classic rigid ball with restitution coefficient r loses a fixed speed
fraction per bounce; constant r < 1 gives a geometric sequence of flights
whose total time converges (the ball stops after infinitely many bounces in
finite time).  The deformable model's slow-impact behavior instead follows
scalar recurrences of the form x_{n+1} = x_n - alpha x_n^beta, collected here
together with the stitched restitution law that joins the two regimes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import ModelParams


class IterateEscaped(RuntimeError):
    """An iterate left (0, x0]; the starting value is too large for the map."""


class NoRoot(RuntimeError):
    """The implicit step has no solution in (0,1); the sequence escaped."""


@dataclass(frozen=True, slots=True)
class MapSequence:
    """Iterates of a scalar recurrence plus a tail power-law fit.

    ``window`` is the half-open index range of the last decade used for the
    fit; ``exponent`` is the least-squares slope of log x against log n over
    it (None when the window is too short to fit).
    """

    iterates: list[float]
    rule: str
    window: tuple[int, int]
    exponent: float | None

    def tail(self) -> list[float]:
        lo, hi = self.window
        return self.iterates[lo:hi]

    def scaled_tail(self, power: float) -> np.ndarray:
        """n^power * x_n over the fit window."""
        lo, hi = self.window
        idx = np.arange(lo, hi, dtype=float)
        return idx**power * np.asarray(self.iterates[lo:hi])


def _tail_fit(iterates: Sequence[float], rule: str) -> MapSequence:
    n = len(iterates)
    lo = max(1, n // 10)
    if n - lo < 3 or min(iterates[lo:]) <= 0.0:
        return MapSequence(list(iterates), rule, (lo, n), None)
    ln_n = np.log(np.arange(lo, n, dtype=float))
    ln_x = np.log(np.asarray(iterates[lo:]))
    slope = float(np.polyfit(ln_n, ln_x, 1)[0])
    return MapSequence(list(iterates), rule, (lo, n), slope)


def _per_step(value, name: str) -> Callable[[int], float]:
    """Normalize a constant, callable of the 1-based step, or iterable."""
    if callable(value):
        return value
    if isinstance(value, (int, float)):
        return lambda k: float(value)
    seq = list(value)

    def lookup(k: int) -> float:
        try:
            return float(seq[k - 1])
        except IndexError:
            raise ValueError(f"{name} has {len(seq)} entries, step {k} requested") from None

    return lookup


# ------------------------------------------------------------ rigid bouncing

def rigid_bounce(
    u0: float,
    g: float,
    r_model: float | Callable[[float], float],
    n: int,
) -> tuple[list[float], list[float], list[float]]:
    """Bounce speeds, flight times and cumulative-time partial sums.

    Each bounce rescales the takeoff speed by ``r_model`` (a constant or a
    function of the incoming speed) and the following flight lasts 2u/g.
    """
    if u0 <= 0.0:
        raise ValueError(f"takeoff speed must be positive, got {u0}")
    if g <= 0.0:
        raise ValueError(f"gravity must be positive, got {g}")
    if n < 1:
        raise ValueError(f"need at least one bounce, got n = {n}")
    r = r_model if callable(r_model) else (lambda u: r_model)
    speeds = [float(u0)]
    for _ in range(n - 1):
        u = speeds[-1]
        speeds.append(r(u) * u)
    flights = [2.0 * u / g for u in speeds]
    cumulative = [float(s) for s in np.cumsum(flights)]
    return speeds, flights, cumulative


def stitched_restitution(u: float, p: ModelParams) -> float:
    """Restitution law joining the fast and slow impact regimes.

    Fast impacts lose a fixed fraction set by the internal vibration decay
    over one half-period; below the crossover speed the loss becomes linear
    in the speed, reaching perfect restitution at zero.  The two branches
    meet continuously at the crossover.
    """
    if u < 0.0:
        raise ValueError(f"impact speed must be nonnegative, got {u}")
    mu, g = p.mu, p.gamma
    if mu >= 1.0:
        raise ValueError(f"the fast branch needs mu < 1, got mu = {mu}")
    if mu == 0.0:
        return 1.0
    r_fast = math.exp(-mu * math.pi / math.sqrt(1.0 - mu * mu))
    u_c = 3.0 * g * (1.0 - r_fast) / mu
    if u > u_c:
        return r_fast
    return 1.0 - (mu / (3.0 * g)) * u


# ------------------------------------------------------------- scalar maps

def quadratic_map_iterate(
    x0: float,
    alpha_seq: float | Callable[[int], float] | Iterable[float],
    n: int,
) -> MapSequence:
    """Iterate x_{k+1} = x_k - alpha_k x_k^2 for n steps.

    ``alpha_seq`` is a constant, a callable of the 1-based step index, or an
    iterable of per-step coefficients.
    """
    if not 0.0 < x0:
        raise ValueError(f"starting value must be positive, got {x0}")
    alpha = _per_step(alpha_seq, "alpha_seq")
    xs = [float(x0)]
    for k in range(1, n + 1):
        x = xs[-1]
        nxt = x - alpha(k) * x * x
        if not 0.0 < nxt <= x0:
            raise IterateEscaped(f"step {k}: iterate {nxt} left (0, {x0}]")
        xs.append(nxt)
    return _tail_fit(xs, "x - alpha*x^2")


def power_map_iterate(x0: float, alpha: float, beta: float, n: int) -> MapSequence:
    """Iterate x_{k+1} = x_k - alpha x_k^beta for n steps, beta > 1."""
    if not 0.0 < x0:
        raise ValueError(f"starting value must be positive, got {x0}")
    if beta <= 1.0:
        raise ValueError(f"the power map needs beta > 1, got {beta}")
    xs = [float(x0)]
    for k in range(1, n + 1):
        x = xs[-1]
        nxt = x - alpha * x**beta
        if not 0.0 < nxt <= x0:
            raise IterateEscaped(f"step {k}: iterate {nxt} left (0, {x0}]")
        xs.append(nxt)
    return _tail_fit(xs, f"x - alpha*x^{beta}")


def _f_poly(x: float) -> float:
    return x * (6.0 - 4.0 * x + x * x)


def _g_poly(x: float) -> float:
    q = 1.0 - x
    return x * (6.0 - 8.0 * x + 3.0 * x * x) / (q * q * q)


def _g_inverse(target: float) -> float:
    """Solve g(x) = target for x in (0,1); g is increasing and onto (0, inf)."""
    if target <= 0.0:
        raise NoRoot(f"no solution in (0,1) for target {target}")
    hi = 0.5
    while _g_poly(hi) < target:
        hi = 0.5 * (1.0 + hi)
    lo = 0.0
    x = min(target / 6.0, 0.5 * hi)  # from the slope-6 linearization at zero
    for _ in range(80):
        q = 1.0 - x
        val = _g_poly(x) - target
        if val > 0.0:
            hi = x
        else:
            lo = x
        if hi - lo <= 1e-15:
            break
        deriv = (6.0 - 4.0 * x + x * x) / (q * q * q * q)
        step = x - val / deriv
        x = step if lo < step < hi else 0.5 * (lo + hi)
    return x


def alpha_implicit_map_iterate(
    alpha0: float,
    b_seq: float | Callable[[int], float] | Iterable[float],
    n: int,
) -> MapSequence:
    """Iterate the implicit cubic relation linking consecutive slow-impact
    loss coefficients, f(alpha_k) + b_k = g(alpha_{k+1}), for n steps.

    With f(x) = 6x - 4x^2 + x^3 and g(x) = (6x - 8x^2 + 3x^3)/(1-x)^3 one has
    g > f on (0,1), so for vanishing b the solved iterate contracts toward
    zero; each step inverts g by safeguarded Newton from the slope-6 guess.
    """
    if not 0.0 < alpha0 < 1.0:
        raise ValueError(f"starting value must be in (0,1), got {alpha0}")
    b = _per_step(b_seq, "b_seq")
    xs = [float(alpha0)]
    for k in range(1, n + 1):
        target = _f_poly(xs[-1]) + b(k)
        xs.append(_g_inverse(target))
    return _tail_fit(xs, "g(next) = f(prev) + b")


def divergent_sum_check(seq: Sequence[float] | MapSequence) -> dict:
    """Classify the partial-sum growth of a positive sequence.

    Returns ``kind`` ("convergent", "linear" or "logarithmic"), the final
    partial sum, and for the logarithmic case the fitted slope of the partial
    sums against log n (which estimates 1/alpha for the quadratic map).
    """
    xs = np.asarray(seq.iterates if isinstance(seq, MapSequence) else list(seq), dtype=float)
    if len(xs) < 10 or np.any(xs <= 0.0):
        raise ValueError("need at least 10 positive terms")
    sums = np.cumsum(xs)
    n = len(xs)
    lo = max(2, n // 10)
    tail = xs[lo:]
    out = {"partial_sum": float(sums[-1]), "log_slope": None}
    ratios = tail[1:] / tail[:-1]
    if ratios.max() < 0.95:
        # terms shrink geometrically: bound the remainder by the worst ratio
        r = float(ratios.max())
        out["kind"] = "convergent"
        out["sum_bound"] = float(sums[-1] + tail[-1] * r / (1.0 - r))
        return out
    if tail.max() - tail.min() <= 1e-12 * tail.mean():
        out["kind"] = "linear"
        return out
    idx = np.arange(lo, n, dtype=float)
    out["kind"] = "logarithmic"
    out["log_slope"] = float(np.polyfit(np.log(idx), sums[lo:], 1)[0])
    return out
