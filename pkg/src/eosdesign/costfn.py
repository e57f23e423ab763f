"""Concave opening-cost functions and their piecewise-linear over-approximation.

A facility's opening cost is fixed_cost + operating_cost * g(capacity) with g
concave, non-decreasing and strictly increasing wherever it is evaluated.
Built-in families: linear g(u) = u, square_root g(u) = sqrt(u), fractional
g(u) = u / (u + 1). Custom concave functions are supported through value and
derivative callables.

The linearization covers a capacity range [lo, hi] with tangent lines chosen
so the envelope (pointwise minimum of the tangents) stays within a relative
error of epsilon above g everywhere in range. Tangent points and breakpoints
are generated by alternating two scalar fixed-point equations: the tangent at
mu_k meets (1+eps)*g at the previous breakpoint, and the next breakpoint is
where that tangent's relative error climbs back to eps. The square-root and
fractional families admit closed forms for both steps; anything else is solved
by safeguarded bracketing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .instance import canonical_family

_MAX_PIECES = 100_000
# Bracket expansion limit: beyond this, the tangent target is unreachable and
# a single final piece suffices (bounded g), or the piece covers everything
# to the right (asymptotically linear g).
_BRACKET_CAP = 1e30


@dataclass(frozen=True)
class CostFunction:
    """Opening-cost shape g with value and first-derivative evaluation."""

    family: str
    value_fn: Callable[[np.ndarray], np.ndarray] | None = None
    deriv_fn: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.family != "custom":
            object.__setattr__(self, "family", canonical_family(self.family))
            return
        if self.value_fn is None or self.deriv_fn is None:
            raise ValueError("custom cost function needs value_fn and deriv_fn")
        # Strictly positive slope is required downstream (capacity formulas
        # divide by g'); probe a spread of magnitudes at construction.
        probes = np.geomspace(1e-3, 1e6, 10)
        d = np.asarray(self.deriv_fn(probes), dtype=float)
        if not (np.isfinite(d).all() and (d > 0).all()):
            raise ValueError("custom cost function must have positive derivative")

    def value(self, mu):
        """g(mu) for scalar or array mu >= 0."""
        mu_arr = np.asarray(mu, dtype=float)
        if (mu_arr < 0).any():
            raise ValueError("capacity must be non-negative")
        if self.family == "linear":
            out = mu_arr.copy()
        elif self.family == "square_root":
            out = np.sqrt(mu_arr)
        elif self.family == "fractional":
            out = mu_arr / (mu_arr + 1.0)
        else:
            out = np.asarray(self.value_fn(mu_arr), dtype=float)
        return out if isinstance(mu, np.ndarray) else float(out)

    def derivative(self, mu):
        """g'(mu) for scalar or array mu > 0 (square_root blows up at 0)."""
        mu_arr = np.asarray(mu, dtype=float)
        if self.family == "square_root" and (mu_arr <= 0).any():
            raise ValueError("square_root derivative is unbounded at capacity 0")
        if (mu_arr < 0).any():
            raise ValueError("capacity must be non-negative")
        if self.family == "linear":
            out = np.ones_like(mu_arr)
        elif self.family == "square_root":
            out = 0.5 / np.sqrt(mu_arr)
        elif self.family == "fractional":
            out = (mu_arr + 1.0) ** -2
        else:
            out = np.asarray(self.deriv_fn(mu_arr), dtype=float)
        return out if isinstance(mu, np.ndarray) else float(out)


def cost_function(family: str) -> CostFunction:
    """Built-in cost function for a family name (aliases accepted)."""
    return CostFunction(canonical_family(family))


@dataclass(frozen=True, eq=False)
class Linearization:
    """Tangent-line envelope of a concave opening-cost function.

    Pieces are ordered by tangent point; slopes strictly decrease. For every
    capacity in [lo, hi] the envelope over-estimates g by a relative error in
    [0, epsilon]. `breakpoints` has one more entry than `tangent_points`
    (range ends where each piece's error returns to epsilon); `crossings`
    holds the capacities where the envelope switches pieces.
    """

    family: str
    epsilon: float
    lo: float
    hi: float
    tangent_points: np.ndarray  # (K,)
    breakpoints: np.ndarray     # (K+1,), last entry may be inf
    slopes: np.ndarray          # (K,)
    intercepts: np.ndarray      # (K,)
    crossings: np.ndarray       # (K-1,)

    def __post_init__(self):
        for name in ("tangent_points", "breakpoints", "slopes", "intercepts", "crossings"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_pieces(self) -> int:
        return len(self.tangent_points)

    def piece_index(self, mu):
        """Index of the envelope-minimal piece at each capacity."""
        return np.searchsorted(self.crossings, np.asarray(mu, dtype=float), side="right")

    def envelope(self, mu):
        """Envelope value min_k [g(mu_k) + g'(mu_k)(mu - mu_k)] at mu."""
        mu_arr = np.asarray(mu, dtype=float)
        k = self.piece_index(mu_arr)
        out = self.slopes[k] * mu_arr + self.intercepts[k]
        return out if isinstance(mu, np.ndarray) else float(out)

    def rows(self):
        """(k, tangent_point, breakpoint, slope, intercept) per piece."""
        for k in range(self.n_pieces):
            yield (k, float(self.tangent_points[k]), float(self.breakpoints[k + 1]),
                   float(self.slopes[k]), float(self.intercepts[k]))


# ---------------------------------------------------------------------------
# Tangent/breakpoint stepping
# ---------------------------------------------------------------------------

def sqrt_next_tangent(b: float, eps: float) -> float:
    """Square-root family: tangent point whose line meets (1+eps)g at b."""
    return ((1.0 + eps) * math.sqrt(b) + math.sqrt((eps * eps + 2.0 * eps) * b)) ** 2


def sqrt_next_breakpoint(mu: float, eps: float) -> float:
    """Square-root family: where the tangent at mu re-reaches error eps."""
    return ((1.0 + eps) * math.sqrt(mu) + math.sqrt((eps * eps + 2.0 * eps) * mu)) ** 2


def frac_next_tangent(b: float, eps: float) -> float | None:
    """Fractional family tangent step; None when no tangent attains the target.

    Tangent values at b are bounded above by sup g = 1, so once
    (1+eps)*g(b) >= 1 (i.e. eps*b >= 1) the equation has no root.
    """
    if eps * b >= 1.0:
        return None
    return ((1.0 + eps) * b + (1.0 + b) * math.sqrt(eps * b)) / (1.0 - eps * b)


def frac_next_breakpoint(mu: float, eps: float) -> float:
    return 0.5 * (
        2.0 * mu + eps * (1.0 + mu) ** 2
        + (1.0 + mu) * math.sqrt(eps * eps * (1.0 + mu) ** 2 + 4.0 * eps * mu)
    )


def _tangent_at(fn: CostFunction, mu: float, x: float) -> float:
    """Value at x of the line tangent to g at mu."""
    return fn.value(mu) + fn.derivative(mu) * (x - mu)


def numeric_next_tangent(fn: CostFunction, b: float, eps: float) -> float | None:
    """Root of (1+eps)g(b) = g(mu) + g'(mu)(b - mu) for mu > b, or None.

    The tangent value at b increases in mu (concavity), so the root bracket
    expands upward; an exhausted bracket means the target is unreachable.
    """
    target = (1.0 + eps) * fn.value(b)

    def resid(mu: float) -> float:
        return _tangent_at(fn, mu, b) - target

    if resid(b) >= 0:  # already at/above target: degenerate, treat as no root
        return None
    hi = max(2.0 * b, b + 1.0)
    while resid(hi) < 0:
        hi *= 4.0
        if hi > _BRACKET_CAP:
            return None
    return brentq(resid, b, hi, xtol=1e-12, rtol=1e-12)


def numeric_next_breakpoint(fn: CostFunction, mu: float, eps: float) -> float:
    """Root of g(mu) + g'(mu)(b - mu) = (1+eps)g(b) for b > mu, or inf.

    No root means the tangent stays within the error band forever (slope of g
    decays too slowly), so the piece covers the rest of the range.
    """

    def resid(b: float) -> float:
        return _tangent_at(fn, mu, b) - (1.0 + eps) * fn.value(b)

    hi = max(2.0 * mu, mu + 1.0)
    while resid(hi) < 0:
        hi *= 4.0
        if hi > _BRACKET_CAP:
            return math.inf
    return brentq(resid, mu, hi, xtol=1e-12, rtol=1e-12)


def linearize(
    fn: CostFunction,
    epsilon: float,
    lo: float,
    hi: float,
    method: str = "auto",
) -> Linearization:
    """Build the tangent envelope of `fn` over [lo, hi] with error bound epsilon.

    `method` is "auto" (closed forms for the built-in nonlinear families,
    numeric otherwise), "closed" or "numeric". The linear family is exact with
    a single piece regardless of method.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not (0 < lo < hi):
        raise ValueError("capacity range must satisfy 0 < lo < hi")
    if method not in ("auto", "closed", "numeric"):
        raise ValueError(f"unknown method {method!r}")

    if fn.family == "linear":
        return Linearization(
            family=fn.family, epsilon=epsilon, lo=lo, hi=hi,
            tangent_points=np.array([lo]), breakpoints=np.array([lo, hi]),
            slopes=np.array([1.0]), intercepts=np.array([0.0]),
            crossings=np.array([]),
        )

    use_closed = method == "closed" or (
        method == "auto" and fn.family in ("square_root", "fractional"))
    if use_closed and fn.family == "square_root":
        next_tangent = lambda b: sqrt_next_tangent(b, epsilon)
        next_breakpoint = lambda mu: sqrt_next_breakpoint(mu, epsilon)
    elif use_closed and fn.family == "fractional":
        next_tangent = lambda b: frac_next_tangent(b, epsilon)
        next_breakpoint = lambda mu: frac_next_breakpoint(mu, epsilon)
    elif use_closed:
        raise ValueError(f"no closed-form stepping for family {fn.family!r}")
    else:
        next_tangent = lambda b: numeric_next_tangent(fn, b, epsilon)
        next_breakpoint = lambda mu: numeric_next_breakpoint(fn, mu, epsilon)

    breakpoints = [float(lo)]
    tangents: list[float] = []
    while breakpoints[-1] < hi:
        mu = next_tangent(breakpoints[-1])
        if mu is None:
            # No tangent reaches the (1+eps) target anymore; one last piece
            # anchored at the range top covers [b, hi] within the bound.
            mu = float(hi)
        tangents.append(mu)
        breakpoints.append(next_breakpoint(mu))
        if len(tangents) > _MAX_PIECES:
            raise RuntimeError("linearization did not terminate (piece cap hit)")

    mus = np.array(tangents)
    slopes = fn.derivative(mus)
    if not ((slopes > 0).all() and (np.diff(slopes) < 0).all()):
        raise ValueError("cost function slopes must be positive and strictly decreasing")
    intercepts = fn.value(mus) - mus * slopes
    crossings = (intercepts[1:] - intercepts[:-1]) / (slopes[:-1] - slopes[1:])
    return Linearization(
        family=fn.family, epsilon=epsilon, lo=float(lo), hi=float(hi),
        tangent_points=mus, breakpoints=np.array(breakpoints),
        slopes=slopes, intercepts=intercepts, crossings=crossings,
    )


def default_capacity_range(
    fn: CostFunction, total_demand: float, max_waiting_cost: float, min_operating_cost: float
) -> tuple[float, float]:
    """Capacity range no sensible design leaves.

    The top is total demand plus the largest capacity slack any facility's
    closed-form sizing can add, evaluated with the slope at a first-pass guess
    (one fixed-point iteration); the bottom defaults to 1 to keep relative
    error well-defined away from g(0) = 0.
    """
    if total_demand <= 0 or max_waiting_cost <= 0 or min_operating_cost <= 0:
        raise ValueError("demand, waiting cost and operating cost must be positive")

    def cap(m: float) -> float:
        return total_demand + math.sqrt(
            max_waiting_cost * total_demand / (min_operating_cost * fn.derivative(m)))

    hi = cap(cap(total_demand))
    lo = min(1.0, hi / 2.0)
    return lo, hi
