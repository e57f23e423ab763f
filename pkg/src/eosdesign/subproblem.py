"""Exact per-facility subproblems of the relaxed design model.

With the assignment constraint dualized, the relaxed model separates by
facility. For one facility and one linear piece of the opening cost, plugging
the closed-form optimal capacity into the objective leaves a binary selection
problem over customers:

    minimize  sum_j (assign_cost_j - u_j) * y_j + sqrt(sum_j congestion_j * y_j)

which is solved exactly by a ratio sort and a prefix scan: the optimal
selection is always a prefix of the customers ordered by
(assign_cost - u) / congestion. The facility opens iff its best piece value is
negative; the optimal capacity then exceeds the selected demand by
sqrt(w * demand / (c * slope)).

`solve_facility`/`solve_inner` are the readable reference path.
`SubproblemBatch` solves all facilities and pieces at once with shared numpy
tensors; the sort order is piece-independent (the ratio is a positive affine
transform of (serving + access - u_j / lambda_j)), so one stable argsort per
facility covers every piece.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .costfn import Linearization
from .instance import Instance


@dataclass(frozen=True)
class PieceConstants:
    """Constants of the selection problem for one (facility, piece) pair."""

    fixed_cost: float            # opening the facility on this piece, capacity-free part
    assign_costs: np.ndarray     # linear cost of selecting each customer
    congestion_terms: np.ndarray  # each customer's contribution under the square root

    def __post_init__(self):
        for name in ("assign_costs", "congestion_terms"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True, eq=False)
class SubproblemResult:
    """Optimal relaxed decision for one facility at given multipliers."""

    facility: int
    piece: int          # best piece index
    value: float        # best piece objective; facility opens iff negative
    open: bool
    customers: np.ndarray  # selected customer ids, ascending; empty when closed
    demand: float          # total selected demand rate
    capacity: float        # closed-form optimal capacity; 0 when closed

    def __post_init__(self):
        arr = np.asarray(self.customers, dtype=int)
        arr.setflags(write=False)
        object.__setattr__(self, "customers", arr)


def piece_constants(inst: Instance, lin: Linearization, facility: int, piece: int) -> PieceConstants:
    """Selection-problem constants for one facility and one tangent piece."""
    f = inst.facilities[facility]
    lam = inst.demand_rates
    slope = float(lin.slopes[piece])
    cg = f.operating_cost * slope
    fixed = f.fixed_cost + f.operating_cost * float(lin.intercepts[piece])
    assign = (f.serving_cost + inst.access_cost[facility] + cg) * lam
    congestion = 4.0 * f.waiting_cost * cg * lam
    return PieceConstants(fixed, assign, congestion)


def solve_inner(pc: PieceConstants, multipliers: np.ndarray) -> tuple[float, np.ndarray]:
    """Exact minimum of the binary selection problem (fixed cost excluded).

    Customers with non-negative reduced cost are never selected; those with
    negative reduced cost and zero congestion term are always selected; the
    rest are scanned as prefixes of the ascending reduced-cost/congestion
    ratio order (stable on ties, empty prefix allowed). Returns the optimal
    value and the selected customer ids in ascending order.
    """
    d = pc.assign_costs - np.asarray(multipliers, dtype=float)
    r = pc.congestion_terms
    always = (d < 0) & (r == 0)
    scan = (d < 0) & (r > 0)
    base_val = float(d[always].sum())
    base_r = float(r[always].sum())

    idx = np.flatnonzero(scan)
    order = idx[np.argsort(d[idx] / r[idx], kind="stable")]
    cum_d = base_val + np.cumsum(d[order])
    cum_r = base_r + np.cumsum(r[order])
    prefix_vals = cum_d + np.sqrt(cum_r)
    empty_val = base_val + np.sqrt(base_r)
    vals = np.concatenate(([empty_val], prefix_vals))
    m_star = int(np.argmin(vals))  # first minimum: shortest prefix wins ties
    chosen = np.concatenate((np.flatnonzero(always), order[:m_star]))
    return float(vals[m_star]), np.sort(chosen)


def solve_facility(
    inst: Instance, lin: Linearization, facility: int, multipliers: np.ndarray
) -> SubproblemResult:
    """Optimal relaxed decision for one facility: best piece, selection, capacity."""
    best_val = np.inf
    best_piece = 0
    best_sel = np.array([], dtype=int)
    for k in range(lin.n_pieces):
        pc = piece_constants(inst, lin, facility, k)
        inner, sel = solve_inner(pc, multipliers)
        z = pc.fixed_cost + inner
        if z < best_val:
            best_val, best_piece, best_sel = z, k, sel
    return _build_result(inst, lin, facility, best_piece, float(best_val), best_sel)


def _build_result(
    inst: Instance, lin: Linearization, facility: int, piece: int, value: float,
    selection: np.ndarray,
) -> SubproblemResult:
    fac = inst.facilities[facility]
    if value < 0:
        demand = float(inst.demand_rates[selection].sum())
        cg = fac.operating_cost * float(lin.slopes[piece])
        capacity = demand + np.sqrt(fac.waiting_cost * demand / cg)
        return SubproblemResult(facility, piece, value, True, selection, demand, float(capacity))
    return SubproblemResult(facility, piece, value, False,
                            np.array([], dtype=int), 0.0, 0.0)


class SubproblemBatch:
    """Vectorized solver for all facility subproblems at a multiplier vector.

    Precomputes everything that does not depend on the multipliers; `solve`
    then costs a handful of elementwise passes over an
    (n_facilities, n_pieces, n_customers) workspace. Facilities are
    independent, so chunking them over threads changes nothing numerically.
    """

    def __init__(self, inst: Instance, lin: Linearization, n_jobs: int = 1):
        if (inst.operating_costs <= 0).any():
            raise ValueError("operating_cost must be positive to solve")
        self.inst = inst
        self.lin = lin
        self.n_jobs = max(1, int(n_jobs))
        lam = inst.demand_rates
        self.lam = lam
        self.serve_access = (inst.serving_costs[:, None] + inst.access_cost) * lam[None, :]
        self.cg = inst.operating_costs[:, None] * lin.slopes[None, :]          # (I, K)
        self.piece_fixed = (inst.fixed_costs[:, None]
                            + inst.operating_costs[:, None] * lin.intercepts[None, :])
        self.sqrt_coef = np.sqrt(4.0 * inst.waiting_costs[:, None] * self.cg)  # (I, K)

    def solve(self, multipliers: np.ndarray) -> list[SubproblemResult]:
        u = np.asarray(multipliers, dtype=float)
        n = self.inst.n_facilities
        if self.n_jobs == 1 or n < 2 * self.n_jobs:
            return self._solve_block(0, n, u)
        bounds = np.linspace(0, n, self.n_jobs + 1).astype(int)
        chunks = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if a < b]
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(lambda ab: self._solve_block(*ab, u), chunks))
        return [res for part in parts for res in part]

    def _solve_block(self, i0: int, i1: int, u: np.ndarray) -> list[SubproblemResult]:
        lam = self.lam
        base = self.serve_access[i0:i1] - u[None, :]          # (B, J)
        order = np.argsort(base / lam[None, :], axis=1, kind="stable")
        base_sorted = np.take_along_axis(base, order, axis=1)
        lam_sorted = lam[order]
        cum_base = np.cumsum(base_sorted, axis=1)
        cum_lam = np.cumsum(lam_sorted, axis=1)
        sqrt_cum_lam = np.sqrt(cum_lam)

        cg = self.cg[i0:i1]
        sq = self.sqrt_coef[i0:i1]
        # prefix values for every piece: (B, K, J)
        q = cum_base[:, None, :] + cg[:, :, None] * cum_lam[:, None, :] \
            + sq[:, :, None] * sqrt_cum_lam[:, None, :]
        inner = np.minimum(q.min(axis=2), 0.0)                # empty prefix allowed
        z = self.piece_fixed[i0:i1] + inner                   # (B, K)
        k_best = np.argmin(z, axis=1)

        results = []
        for b in range(i1 - i0):
            i = i0 + b
            k = int(k_best[b])
            value = float(z[b, k])
            if value < 0:
                row = cum_base[b] + cg[b, k] * cum_lam[b] + sq[b, k] * sqrt_cum_lam[b]
                m_star = int(np.argmin(np.concatenate(([0.0], row))))
                sel = np.sort(order[b, :m_star])
                demand = float(cum_lam[b, m_star - 1])
                capacity = demand + np.sqrt(
                    self.inst.waiting_costs[i] * demand / cg[b, k])
                results.append(SubproblemResult(i, k, value, True, sel, demand,
                                                float(capacity)))
            else:
                results.append(SubproblemResult(i, k, value, False,
                                                np.array([], dtype=int), 0.0, 0.0))
        return results
