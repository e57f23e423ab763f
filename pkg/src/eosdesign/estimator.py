"""Estimator-style front end so the solver composes with sklearn tooling.

`ServiceSystemDesigner` treats an `Instance` as the data to fit: `fit` runs
the dual ascent, after which the customer-to-facility assignment is exposed as
`labels_` (clustering-style) along with the open set, capacities and the full
solve report. Hyperparameters follow sklearn conventions (stored verbatim in
`__init__`, `get_params`/`set_params`/`clone` work as usual).
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .instance import Instance
from .lagrangian import SolverConfig, solve


def check_instance(X) -> Instance:
    """Validation helper: accept only a (already self-validated) Instance."""
    if not isinstance(X, Instance):
        raise TypeError(
            f"expected an eosdesign Instance, got {type(X).__name__}; "
            "build one with generate_instance/read_instance")
    return X


class ServiceSystemDesigner(BaseEstimator):
    """Design a congestion-aware service system for a problem instance.

    Parameters mirror `SolverConfig`. After `fit(instance)`:

    - ``labels_``: facility index serving each customer
    - ``open_``: boolean open/closed per facility
    - ``capacity_``: service capacity per facility
    - ``cost_``: total cost of the returned design
    - ``gap_``, ``n_iter_``, ``converged_``: solve diagnostics
    - ``solution_``, ``report_``: full objects
    """

    def __init__(self, tolerance=0.01, max_iters=10_000, alpha0=0.01,
                 stall_window=10, stall_threshold=1e-6, norm="paper",
                 epsilon=0.01, lin_lo=None, lin_hi=None, n_jobs=1, seed=None):
        self.tolerance = tolerance
        self.max_iters = max_iters
        self.alpha0 = alpha0
        self.stall_window = stall_window
        self.stall_threshold = stall_threshold
        self.norm = norm
        self.epsilon = epsilon
        self.lin_lo = lin_lo
        self.lin_hi = lin_hi
        self.n_jobs = n_jobs
        self.seed = seed

    def _config(self) -> SolverConfig:
        return SolverConfig(
            tolerance=self.tolerance, max_iters=self.max_iters, alpha0=self.alpha0,
            stall_window=self.stall_window, stall_threshold=self.stall_threshold,
            norm=self.norm, epsilon=self.epsilon, lin_lo=self.lin_lo,
            lin_hi=self.lin_hi, n_jobs=self.n_jobs, seed=self.seed)

    def fit(self, X, y=None):
        """Solve the instance `X`; `y` is ignored (pipeline compatibility)."""
        inst = check_instance(X)
        report = solve(inst, self._config())
        self.report_ = report
        self.solution_ = report.solution
        self.labels_ = report.solution.assignment.copy()
        self.open_ = report.solution.open.copy()
        self.capacity_ = report.solution.capacity.copy()
        self.cost_ = report.best_upper_bound
        self.gap_ = report.final_gap
        self.n_iter_ = report.iterations
        self.converged_ = report.converged
        return self

    def predict(self, X=None) -> np.ndarray:
        """Assignment labels of the fitted instance."""
        if not hasattr(self, "labels_"):
            raise NotFittedError("call fit before predict")
        return self.labels_.copy()

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X, y).predict()

    def score(self, X=None, y=None) -> float:
        """Negative total cost (sklearn convention: larger is better)."""
        if not hasattr(self, "cost_"):
            raise NotFittedError("call fit before score")
        return -self.cost_
