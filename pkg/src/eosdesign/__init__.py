"""Service system design under economies of scale.

Facility location with continuous capacities, single-server Markovian
congestion at each open facility, and concave opening costs, solved by
piecewise linearization plus Lagrangian dual ascent with exact
polynomial-time subproblems.
"""

from .costfn import (CostFunction, Linearization, cost_function,
                     default_capacity_range, linearize)
from .estimator import ServiceSystemDesigner, check_instance
from .evaluator import (CostBreakdown, InfeasibleSolutionError, SteadyStateError,
                        evaluate, mm1_wait, oracle_optimum)
from .instance import (FAMILIES, FAMILY_OPERATING_COST, Customer, Facility,
                       Instance, InstanceFormatError, Solution, convert_holmberg,
                       generate_instance, generate_suite, read_instance,
                       with_family, write_instance)
from .lagrangian import (DualState, IterationRecord, SolveReport, SolverConfig,
                         constraint_violation, lower_bound, repair, solve,
                         update_multipliers)
from .subproblem import (PieceConstants, SubproblemBatch, SubproblemResult,
                         piece_constants, solve_facility, solve_inner)

__version__ = "0.1.0"

__all__ = [
    "CostBreakdown", "CostFunction", "Customer", "DualState", "FAMILIES",
    "FAMILY_OPERATING_COST", "Facility", "InfeasibleSolutionError", "Instance",
    "InstanceFormatError", "IterationRecord", "Linearization", "PieceConstants",
    "ServiceSystemDesigner", "SolveReport", "SolverConfig", "Solution",
    "SteadyStateError", "SubproblemBatch", "SubproblemResult", "check_instance",
    "constraint_violation", "convert_holmberg", "cost_function",
    "default_capacity_range", "evaluate", "generate_instance", "generate_suite",
    "linearize", "lower_bound", "mm1_wait", "oracle_optimum", "piece_constants",
    "read_instance", "repair", "solve", "solve_facility", "solve_inner",
    "update_multipliers", "with_family", "write_instance",
]
