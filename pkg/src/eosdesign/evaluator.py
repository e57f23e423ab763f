"""Exact cost evaluation of designs and brute-force optima for small instances.

Each open facility is a single-server Markovian queue in steady state; a
customer's expected delay is 1/(capacity - assigned demand), so the system
waiting cost at a facility is w * demand / (capacity - demand). `evaluate`
prices a full design (opening + serving + access + waiting) under either the
exact opening-cost curve or its tangent envelope. `oracle_optimum` enumerates
every assignment on desk-scale instances with per-facility capacities
optimized exactly, and serves as the independent check for the solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costfn import CostFunction, Linearization, cost_function
from .instance import Instance, Solution

ORACLE_MAX_FACILITIES = 4
ORACLE_MAX_CUSTOMERS = 8


class SteadyStateError(ValueError):
    """Queue load at or above capacity: no steady state, infinite waiting."""


class InfeasibleSolutionError(ValueError):
    """A design violating the model constraints; the message names the violation."""


def mm1_wait(capacity: float, arrival_rate: float) -> float:
    """Expected per-customer delay 1/(capacity - arrival_rate) in steady state."""
    if arrival_rate < 0:
        raise ValueError("arrival rate must be non-negative")
    if capacity <= arrival_rate:
        raise SteadyStateError(
            f"capacity {capacity} must strictly exceed arrival rate {arrival_rate}")
    return 1.0 / (capacity - arrival_rate)


@dataclass(frozen=True)
class CostBreakdown:
    """The four objective components of a feasible design."""

    opening: float
    serving: float
    access: float
    waiting: float

    @property
    def total(self) -> float:
        return self.opening + self.serving + self.access + self.waiting

    @property
    def shares(self) -> tuple[float, float, float, float]:
        """Percentages of total in (opening, serving, access, waiting) order."""
        t = self.total
        if t == 0:
            return (0.0, 0.0, 0.0, 0.0)
        return tuple(100.0 * part / t for part in
                     (self.opening, self.serving, self.access, self.waiting))


def check_feasible(inst: Instance, sol: Solution) -> None:
    """Raise unless `sol` satisfies every model constraint on `inst`."""
    if sol.open.shape != (inst.n_facilities,) or sol.assignment.shape != (inst.n_customers,):
        raise InfeasibleSolutionError("solution shape does not match instance")
    y = sol.assignment
    if ((y < 0) | (y >= inst.n_facilities)).any():
        j = int(np.flatnonzero((y < 0) | (y >= inst.n_facilities))[0])
        raise InfeasibleSolutionError(
            f"customer {j} is not assigned to exactly one facility")
    if not sol.open[y].all():
        j = int(np.flatnonzero(~sol.open[y])[0])
        raise InfeasibleSolutionError(
            f"customer {j} is assigned to closed facility {y[j]}")
    lam = sol.assigned_demand(inst)
    closed = ~sol.open
    if (sol.capacity[closed] != 0).any():
        i = int(np.flatnonzero(closed & (sol.capacity != 0))[0])
        raise InfeasibleSolutionError(f"closed facility {i} has nonzero capacity")
    for i in np.flatnonzero(sol.open):
        if sol.capacity[i] <= lam[i]:
            raise SteadyStateError(
                f"facility {int(i)}: capacity {sol.capacity[i]} does not exceed "
                f"assigned demand {lam[i]}")


def evaluate(
    inst: Instance,
    sol: Solution,
    exact_g: bool = True,
    lin: Linearization | None = None,
) -> CostBreakdown:
    """Cost breakdown of a feasible design.

    With exact_g=False the opening cost uses the tangent envelope of `lin`
    instead of the exact curve (the solver-internal objective).
    """
    check_feasible(inst, sol)
    if exact_g:
        g = cost_function(inst.cost_family).value
    else:
        if lin is None:
            raise ValueError("linearized evaluation needs a Linearization")
        g = lin.envelope
    lam = sol.assigned_demand(inst)
    open_idx = np.flatnonzero(sol.open)
    mu = sol.capacity[open_idx]
    opening = float(np.sum(inst.fixed_costs[open_idx]
                           + inst.operating_costs[open_idx] * g(mu)))
    y = sol.assignment
    serving = float(np.sum(inst.serving_costs[y] * inst.demand_rates))
    access = float(np.sum(inst.access_cost[y, np.arange(inst.n_customers)]
                          * inst.demand_rates))
    waiting = float(np.sum(inst.waiting_costs[open_idx] * lam[open_idx]
                           / (mu - lam[open_idx])))
    return CostBreakdown(opening, serving, access, waiting)


# ---------------------------------------------------------------------------
# Brute-force optimum
# ---------------------------------------------------------------------------

def _golden_min(phi, a: float, b: float, rel_tol: float = 1e-11) -> tuple[float, float]:
    """Golden-section minimum of a unimodal scalar function on [a, b]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = phi(x1), phi(x2)
    while (b - a) > rel_tol * max(1.0, abs(a), abs(b)):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = phi(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = phi(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def exact_capacity_cost(
    fn: CostFunction,
    operating_cost: float,
    waiting_cost: float,
    demand: float,
    mu_cap: float,
    n_grid: int = 10_000,
) -> tuple[float, float]:
    """Globally minimize c*g(mu) + w*demand/(mu - demand) over (demand, mu_cap].

    The objective mixes a concave and a convex term, so a dense log-spaced
    grid brackets every basin and golden-section refines each; the right
    boundary is kept as a candidate (the fractional family's cost can decrease
    all the way to the cap). Returns (cost, capacity).
    """
    if demand <= 0:
        raise ValueError("demand must be positive")
    if mu_cap <= demand:
        raise ValueError("capacity cap must exceed demand")
    span = mu_cap - demand
    offsets = np.geomspace(span * 1e-12, span, n_grid)
    mus = demand + offsets
    phi_grid = operating_cost * fn.value(mus) + waiting_cost * demand / offsets

    def phi(mu: float) -> float:
        return (operating_cost * fn.value(mu)
                + waiting_cost * demand / (mu - demand))

    best_cost = float(phi_grid[-1])
    best_mu = float(mus[-1])
    interior = np.flatnonzero(
        (phi_grid[1:-1] <= phi_grid[:-2]) & (phi_grid[1:-1] <= phi_grid[2:])) + 1
    candidates = list(interior)
    if phi_grid[0] <= phi_grid[1]:
        candidates.append(0)
    for k in candidates:
        a = float(mus[max(k - 1, 0)])
        b = float(mus[min(k + 1, n_grid - 1)])
        mu_star, cost = _golden_min(phi, a, b)
        if cost < best_cost:
            best_cost, best_mu = float(cost), float(mu_star)
    return best_cost, best_mu


def _facility_tables(
    inst: Instance, lin: Linearization, exact_g: bool
) -> tuple[np.ndarray, np.ndarray]:
    """Per-facility, per-customer-subset optimal cost and capacity tables."""
    n_i, n_j = inst.n_facilities, inst.n_customers
    n_masks = 1 << n_j
    bits = (np.arange(n_masks)[:, None] >> np.arange(n_j)[None, :]) & 1
    lam_mask = bits @ inst.demand_rates  # (M,)
    fn = cost_function(inst.cost_family)
    min_slope = float(lin.slopes[-1])
    cost = np.zeros((n_i, n_masks))
    cap = np.zeros((n_i, n_masks))
    for i in range(n_i):
        f = inst.facilities[i]
        sa = bits @ ((f.serving_cost + inst.access_cost[i]) * inst.demand_rates)
        lam_pos = lam_mask[1:]
        if exact_g:
            for m in range(1, n_masks):
                lam = float(lam_mask[m])
                mu_cap = max(lin.hi, lam + math.sqrt(
                    f.waiting_cost * lam / (f.operating_cost * min_slope))) * (1 + 1e-9)
                open_cost, mu = exact_capacity_cost(
                    fn, f.operating_cost, f.waiting_cost, lam, mu_cap)
                cost[i, m] = f.fixed_cost + open_cost + sa[m]
                cap[i, m] = mu
        else:
            slack = np.sqrt(f.waiting_cost * lam_pos[:, None]
                            / (f.operating_cost * lin.slopes[None, :]))
            mu = lam_pos[:, None] + slack
            piece_cost = (
                f.operating_cost * (lin.intercepts[None, :] + lin.slopes[None, :] * mu)
                + f.waiting_cost * lam_pos[:, None] / slack
            )
            k_best = np.argmin(piece_cost, axis=1)
            rows = np.arange(n_masks - 1)
            cost[i, 1:] = f.fixed_cost + piece_cost[rows, k_best] + sa[1:]
            cap[i, 1:] = mu[rows, k_best]
    return cost, cap


def oracle_optimum(
    inst: Instance, lin: Linearization, exact_g: bool = True
) -> tuple[float, Solution]:
    """Exhaustive optimum over all assignments with optimal capacities.

    Guarded to at most 4 facilities and 8 customers. Facilities left empty are
    never opened (their cost is strictly positive and removable). With
    exact_g=False the opening costs follow the tangent envelope, making this
    the exact optimum of the model the solver works on.
    """
    n_i, n_j = inst.n_facilities, inst.n_customers
    if n_i > ORACLE_MAX_FACILITIES or n_j > ORACLE_MAX_CUSTOMERS:
        raise ValueError(
            f"oracle limited to {ORACLE_MAX_FACILITIES} facilities and "
            f"{ORACLE_MAX_CUSTOMERS} customers, got {n_i}x{n_j}")
    cost, cap = _facility_tables(inst, lin, exact_g)
    n_masks = 1 << n_j
    full = n_masks - 1

    # layer DP over facilities: best[S] = cheapest way to cover set S so far
    best = cost[0].copy()
    choice = [np.arange(n_masks)]  # facility 0 serves its whole layer mask
    for i in range(1, n_i):
        new_best = np.full(n_masks, np.inf)
        new_choice = np.zeros(n_masks, dtype=int)
        for s in range(n_masks):
            sub = s
            while True:
                val = best[s ^ sub] + cost[i, sub]
                if val < new_best[s]:
                    new_best[s] = val
                    new_choice[s] = sub
                if sub == 0:
                    break
                sub = (sub - 1) & s
        best = new_best
        choice.append(new_choice)

    value = float(best[full])
    masks = np.zeros(n_i, dtype=int)
    s = full
    for i in range(n_i - 1, 0, -1):
        masks[i] = choice[i][s]
        s ^= masks[i]
    masks[0] = s

    open_ = masks != 0
    assignment = np.full(n_j, -1, dtype=int)
    capacity = np.zeros(n_i)
    for i in range(n_i):
        if open_[i]:
            members = [j for j in range(n_j) if masks[i] >> j & 1]
            assignment[members] = i
            capacity[i] = cap[i, masks[i]]
    return value, Solution(open_, assignment, capacity)
