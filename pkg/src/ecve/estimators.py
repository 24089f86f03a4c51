"""Estimator-style wrappers around the solvers.

Each solver is a scikit-learn ``BaseEstimator``: hyperparameters go to the
constructor, ``fit(scenario)`` runs the solve and stores ``result_``,
``placement_`` and ``plan_``, and ``score(scenario)`` returns the joint QoE
of the fitted placement and plan on a scenario of the same shape.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .oracle import oracle_solve
from .qoe import check_feasibility, objective
from .schemes import SchemeOptions, solve
from .validation import InvalidArgumentError, check_scenario


class _SolverBase(BaseEstimator):
    scheme = None

    def _options(self):
        params = self.get_params()
        return SchemeOptions.from_mapping({k: v for k, v in params.items()
                                           if k in SchemeOptions.__dataclass_fields__})

    def _solve(self, scenario):
        return solve(scenario, self.scheme, self._options())

    def fit(self, scenario, y=None):
        check_scenario(scenario)
        result = self._solve(scenario)
        self.result_ = result
        self.status_ = result.status
        self.placement_ = result.placement
        self.plan_ = result.plan
        self.Q_ = result.Q
        self.counters_ = dict(result.counters)
        return self

    def score(self, scenario, y=None):
        """Joint QoE of the fitted solution on ``scenario``; ``-inf`` if it is infeasible there."""
        check_is_fitted(self, "result_")
        check_scenario(scenario)
        if self.placement_ is None:
            return -np.inf
        m = np.asarray(self.placement_)
        s = np.asarray(self.plan_)
        if m.shape != scenario.shape:
            raise InvalidArgumentError(f"fitted shape {m.shape} != scenario shape {scenario.shape}",
                                       "scenario")
        if not check_feasibility(scenario, m, s).feasible:
            return -np.inf
        return objective(scenario, m, s).total


class ECVESolver(_SolverBase):
    """Relaxation plus iterative pinning (the near-optimal scheme)."""

    scheme = "ec-ve"

    def __init__(self, n_starts=16, seed=0, tol_constraint=1e-6, tol_grad=1e-6,
                 max_inner_iters=10_000, smoothing_eps=1e-9, frac_tol=1e-6,
                 branch_starts=None, step=None, seed_initial=True):
        self.n_starts = n_starts
        self.seed = seed
        self.tol_constraint = tol_constraint
        self.tol_grad = tol_grad
        self.max_inner_iters = max_inner_iters
        self.smoothing_eps = smoothing_eps
        self.frac_tol = frac_tol
        self.branch_starts = branch_starts
        self.step = step
        self.seed_initial = seed_initial


class GreedyECVESolver(_SolverBase):
    """Fixed-rate caching followed by greedy rate stepping."""

    scheme = "greedy-ec-ve"

    def __init__(self, n_starts=16, seed=0, step=None, frac_tol=1e-6):
        self.n_starts = n_starts
        self.seed = seed
        self.step = step
        self.frac_tol = frac_tol


class ECSTSolver(_SolverBase):
    scheme = "ecst"

    def __init__(self, ecst_rate="r_min"):
        self.ecst_rate = ecst_rate


class ECOnlySolver(_SolverBase):
    scheme = "ec"

    def __init__(self, n_starts=16, seed=0):
        self.n_starts = n_starts
        self.seed = seed


class VEOnlySolver(_SolverBase):
    scheme = "ve"


class OracleSolver(_SolverBase):
    """Exhaustive lattice search; only for tiny instances."""

    def __init__(self, rate_grid_points=11):
        self.rate_grid_points = rate_grid_points

    def _solve(self, scenario):
        return oracle_solve(scenario, self.rate_grid_points)
