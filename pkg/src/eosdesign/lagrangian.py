"""Subgradient dual ascent with a repair heuristic for feasible designs.

The assignment constraints are dualized with unrestricted multipliers, one per
customer. Each iteration solves every facility subproblem exactly (lower
bound), repairs the relaxed selections into a feasible design (upper bound),
and steps the multipliers along the constraint violation. The step follows
the update rule

    u <- u + alpha * (best_ub - lb) / ||v|| * v,   v_j = 1 - (times j selected)

with alpha halved after a configurable run of iterations without meaningful
lower-bound improvement. The loop stops when (best_ub - lb)/lb falls to the
tolerance, when the relaxed solution happens to be feasible (zero violation),
or at the iteration cap.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .costfn import Linearization, cost_function, default_capacity_range, linearize
from .evaluator import CostBreakdown, evaluate
from .instance import Instance, Solution
from .subproblem import SubproblemBatch, SubproblemResult

NORM_VARIANTS = ("paper", "squared")


@dataclass
class SolverConfig:
    """Tunables of the dual ascent."""

    tolerance: float = 0.01        # stop once (best_ub - lb)/lb <= tolerance
    max_iters: int = 10_000
    alpha0: float = 0.01           # initial step control, in (0, 2)
    stall_window: int = 10         # iterations without improvement before halving alpha
    stall_threshold: float = 1e-6  # relative lb improvement that counts as progress
    norm: str = "paper"            # "paper": divide by ||v||; "squared": by ||v||^2
    epsilon: float = 0.01          # linearization relative error bound
    lin_lo: float | None = None    # linearization range override
    lin_hi: float | None = None
    n_jobs: int = 1
    keep_solutions: bool = False   # retain each iteration's repaired design
    seed: int | None = None        # interface parity; the loop draws no randomness

    def validate(self) -> None:
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not (0 < self.alpha0 < 2):
            raise ValueError("alpha0 must lie in (0, 2)")
        if self.stall_window < 1:
            raise ValueError("stall_window must be at least 1")
        if self.norm not in NORM_VARIANTS:
            raise ValueError(f"norm must be one of {NORM_VARIANTS}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


class IterationRecord(NamedTuple):
    t: int
    lower_bound: float
    upper_bound: float
    alpha: float
    violation_norm: float


@dataclass
class DualState:
    """Mutable state of the dual ascent."""

    u: np.ndarray
    alpha: float
    t: int = 0
    best_ub: float = math.inf
    best_solution: Solution | None = None
    best_lb: float = -math.inf
    stall: int = 0
    lb_history: list[float] = field(default_factory=list)
    last_violation_norm: float = math.nan
    relaxed_feasible: bool = False


@dataclass(frozen=True)
class SolveReport:
    """Everything a solve run produced, trace included."""

    converged: bool
    stop_reason: str               # "converged" | "relaxed_feasible" | "iteration_limit"
    iterations: int
    final_gap: float               # (min_s Ub^s - Lb^final)/Lb^final at the stop
    best_gap: float                # smallest per-iteration gap observed
    final_lower_bound: float
    best_lower_bound: float
    best_upper_bound: float
    solution: Solution
    breakdown: CostBreakdown
    trace: tuple[IterationRecord, ...]
    wall_ms: float
    n_pieces: int
    config: SolverConfig
    solutions: tuple[Solution, ...] | None = None  # per iteration, if kept


def lower_bound(
    inst: Instance,
    lin: Linearization,
    u: np.ndarray,
    batch: SubproblemBatch | None = None,
) -> tuple[float, list[SubproblemResult]]:
    """Optimal value of the relaxed model at multipliers u, with raw decisions.

    Facilities contribute min(0, best piece value); the dualized assignment
    constraints add sum(u).
    """
    if batch is None:
        batch = SubproblemBatch(inst, lin)
    raw = batch.solve(u)
    lb = float(np.sum([min(0.0, r.value) for r in raw]) + np.sum(u))
    return lb, raw


def constraint_violation(raw: list[SubproblemResult], n_customers: int) -> np.ndarray:
    """v_j = 1 - (number of open facilities selecting customer j)."""
    v = np.ones(n_customers)
    for r in raw:
        if r.open:
            v[r.customers] -= 1.0
    return v


def _piece_capacity_choice(
    inst: Instance, lin: Linearization, g_values, i: int, demand: float
) -> tuple[float, float]:
    """Best closed-form capacity for facility i at the given demand.

    Scans every tangent piece's capacity candidate and ranks by the exact
    opening-plus-waiting cost; returns (capacity, that cost including the
    fixed cost).
    """
    f = inst.facilities[i]
    slack = np.sqrt(f.waiting_cost * demand / (f.operating_cost * lin.slopes))
    mus = demand + slack
    costs = (f.fixed_cost + f.operating_cost * g_values(mus)
             + f.waiting_cost * demand / slack)
    k = int(np.argmin(costs))
    return float(mus[k]), float(costs[k])


def _open_single_best(inst: Instance, lin: Linearization) -> Solution:
    """Fallback design: one facility serving everyone, cheapest stand-alone."""
    fn = cost_function(inst.cost_family)
    lam_total = inst.total_demand
    best_i, best_cost, best_mu = 0, math.inf, 0.0
    for i in range(inst.n_facilities):
        mu, open_wait = _piece_capacity_choice(inst, lin, fn.value, i, lam_total)
        f = inst.facilities[i]
        sa = float(np.sum((f.serving_cost + inst.access_cost[i]) * inst.demand_rates))
        total = open_wait + sa
        if total < best_cost:
            best_i, best_cost, best_mu = i, total, mu
    open_ = np.zeros(inst.n_facilities, dtype=bool)
    open_[best_i] = True
    capacity = np.zeros(inst.n_facilities)
    capacity[best_i] = best_mu
    assignment = np.full(inst.n_customers, best_i, dtype=int)
    return Solution(open_, assignment, capacity)


def repair(inst: Instance, lin: Linearization, raw: list[SubproblemResult]) -> Solution:
    """Turn relaxed facility decisions into a feasible design.

    Facilities open as in the relaxed solution. Customers selected by several
    facilities go to the selecting facility with the smallest assign-cost to
    congestion ratio; unselected customers go to the open facility with the
    smallest such ratio. Facilities left without customers close, and every
    serving facility's capacity is re-sized by scanning all tangent pieces
    against the exact opening cost. If the relaxed solution opened nothing,
    the cheapest single facility serves everyone.
    """
    open_ = np.array([r.open for r in raw], dtype=bool)
    if not open_.any():
        return _open_single_best(inst, lin)

    n_i, n_j = inst.n_facilities, inst.n_customers
    # ratio of the selection problem's linear cost to its congestion term at
    # each open facility's best piece; demand rates cancel
    cg = inst.operating_costs * lin.slopes[[r.piece for r in raw]]
    ratio = (inst.serving_costs[:, None] + inst.access_cost + cg[:, None]) \
        / (4.0 * inst.waiting_costs[:, None] * cg[:, None])

    assignment = np.full(n_j, -1, dtype=int)
    best_ratio = np.full(n_j, math.inf)
    for i in range(n_i):  # ascending i: ties keep the smallest index
        if not raw[i].open:
            continue
        sel = raw[i].customers
        better = ratio[i, sel] < best_ratio[sel]
        assignment[sel[better]] = i
        best_ratio[sel[better]] = ratio[i, sel[better]]
    uncovered = np.flatnonzero(assignment < 0)
    if uncovered.size:
        open_idx = np.flatnonzero(open_)
        pick = np.argmin(ratio[np.ix_(open_idx, uncovered)], axis=0)
        assignment[uncovered] = open_idx[pick]

    served = np.zeros(n_i, dtype=bool)
    served[np.unique(assignment)] = True
    open_ &= served

    fn = cost_function(inst.cost_family)
    capacity = np.zeros(n_i)
    lam = np.zeros(n_i)
    np.add.at(lam, assignment, inst.demand_rates)
    for i in np.flatnonzero(open_):
        capacity[i], _ = _piece_capacity_choice(inst, lin, fn.value, int(i), float(lam[i]))
    return Solution(open_, assignment, capacity)


def update_multipliers(
    state: DualState,
    raw: list[SubproblemResult],
    lb: float,
    config: SolverConfig | None = None,
) -> DualState:
    """One subgradient step; requires best_ub already updated this iteration.

    Mutates and returns `state`. Sets `relaxed_feasible` (and leaves u
    untouched) when the violation vanishes: the relaxed solution is feasible
    and hence optimal for the linearized model.
    """
    config = config or SolverConfig()
    state.lb_history.append(lb)
    improved = state.best_lb == -math.inf or (
        lb > state.best_lb + config.stall_threshold * max(1.0, abs(state.best_lb)))
    if improved:
        state.stall = 0
    else:
        state.stall += 1
        if state.stall >= config.stall_window:
            state.alpha /= 2.0
            state.stall = 0
    state.best_lb = max(state.best_lb, lb)

    v = constraint_violation(raw, len(state.u))
    vnorm = float(np.linalg.norm(v))
    state.last_violation_norm = vnorm
    if vnorm == 0.0:
        state.relaxed_feasible = True
        return state
    denom = vnorm if config.norm == "paper" else vnorm * vnorm
    state.u = state.u + (state.alpha * (state.best_ub - lb) / denom) * v
    state.t += 1
    return state


def solve(inst: Instance, config: SolverConfig | None = None) -> SolveReport:
    """Run the full dual ascent on an instance; always returns a feasible design."""
    config = config or SolverConfig()
    config.validate()
    fn = cost_function(inst.cost_family)
    if config.lin_lo is None or config.lin_hi is None:
        lo, hi = default_capacity_range(
            fn, inst.total_demand,
            float(inst.waiting_costs.max()), float(inst.operating_costs.min()))
        lo = config.lin_lo if config.lin_lo is not None else lo
        hi = config.lin_hi if config.lin_hi is not None else hi
    else:
        lo, hi = config.lin_lo, config.lin_hi
    lin = linearize(fn, config.epsilon, lo, hi)
    batch = SubproblemBatch(inst, lin, config.n_jobs)

    state = DualState(u=np.zeros(inst.n_customers), alpha=config.alpha0)
    trace: list[IterationRecord] = []
    kept: list[Solution] = []
    best_breakdown: CostBreakdown | None = None
    best_gap = math.inf
    final_gap = math.inf
    final_lb = -math.inf
    best_lb_seen = -math.inf
    stop_reason = "iteration_limit"
    t_start = time.perf_counter()

    for t in range(1, config.max_iters + 1):
        lb, raw = lower_bound(inst, lin, state.u, batch)
        sol = repair(inst, lin, raw)
        bd = evaluate(inst, sol, exact_g=True)
        if config.keep_solutions:
            kept.append(sol)
        if bd.total < state.best_ub:
            state.best_ub = bd.total
            state.best_solution = sol
            best_breakdown = bd
        gap = (state.best_ub - lb) / lb if lb > 0 else math.inf
        best_gap = min(best_gap, gap)
        best_lb_seen = max(best_lb_seen, lb)
        final_gap, final_lb = gap, lb
        if gap <= config.tolerance:
            vnorm = float(np.linalg.norm(constraint_violation(raw, inst.n_customers)))
            trace.append(IterationRecord(t, lb, bd.total, state.alpha, vnorm))
            stop_reason = "converged"
            break
        update_multipliers(state, raw, lb, config)
        trace.append(IterationRecord(t, lb, bd.total, state.alpha,
                                     state.last_violation_norm))
        if state.relaxed_feasible:
            stop_reason = "relaxed_feasible"
            break
    wall_ms = (time.perf_counter() - t_start) * 1000.0

    solution = replace(state.best_solution, cost=best_breakdown)
    return SolveReport(
        converged=final_gap <= config.tolerance,
        stop_reason=stop_reason,
        iterations=len(trace),
        final_gap=final_gap,
        best_gap=best_gap,
        final_lower_bound=final_lb,
        best_lower_bound=best_lb_seen,
        best_upper_bound=state.best_ub,
        solution=solution,
        breakdown=best_breakdown,
        trace=tuple(trace),
        wall_ms=wall_ms,
        n_pieces=lin.n_pieces,
        config=config,
        solutions=tuple(kept) if config.keep_solutions else None,
    )
