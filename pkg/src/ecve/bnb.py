"""Joint caching and encoding by relaxation plus iterative Boolean pinning.

Starting from the relaxed optimum, every fractional cache entry is tried
at 0 and at 1; the best of those ``2 * N_b`` sub-relaxations is adopted and
its pin kept.  This repeats until the placement is integral.  There is no
backtracking: each step commits to one pin.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .relaxed import (FEASIBLE, INFEASIBLE, MAX_ITERS, PinSet, RelaxedOptions,
                      fractional_entries, solve_relaxed)
from .results import better, evaluate, infeasible
from .validation import InvalidArgumentError, check_positive, check_scenario


@dataclass(frozen=True)
class BnbOptions:
    """Settings of the pinning loop.

    ``branch_starts`` overrides the number of random restarts used for each
    branch sub-problem (the branch is always warm-started from the current
    solution with the new pin applied); ``None`` keeps ``relaxed.n_starts``.
    """

    relaxed: RelaxedOptions = field(default_factory=RelaxedOptions)
    frac_tol: float = 1e-6
    tie_tol: float = 1e-9
    branch_starts: int | None = None

    def __post_init__(self):
        if not isinstance(self.relaxed, RelaxedOptions):
            raise InvalidArgumentError("expected RelaxedOptions", "relaxed")
        check_positive(self.frac_tol, "frac_tol")
        check_positive(self.tie_tol, "tie_tol", allow_zero=True)
        if self.branch_starts is not None:
            RelaxedOptions(n_starts=self.branch_starts)

    @property
    def branch_relaxed(self):
        if self.branch_starts is None:
            return self.relaxed
        return replace(self.relaxed, n_starts=self.branch_starts)


@dataclass(frozen=True)
class BnbState:
    pins: PinSet
    solution: object = field(repr=False)
    fractional: tuple = ()
    p: int = 0
    solved: int = 0
    branches: int = 0
    status: str = FEASIBLE

    @property
    def N_b(self):
        return len(self.fractional)


def _snap(m, tol):
    """Round entries within ``tol`` of 0 or 1."""
    m = np.array(m, dtype=float)
    near = np.minimum(np.abs(m), np.abs(m - 1.0)) <= tol
    m[near] = np.rint(m[near])
    return m


def _state(pins, sol, options, p, solved, branches):
    frac = tuple(fractional_entries(sol, options.frac_tol)) if sol.feasible else ()
    status = FEASIBLE if sol.feasible else sol.status
    return BnbState(pins, sol, frac, p, solved, branches, status)


def branch_step(state, scenario, options=None, *, fixed_sizes=None):
    """Solve the 0- and 1-branch of every fractional entry and adopt the best.

    Infeasible branches score ``+inf``.  Candidates are visited in
    ``(j, i, k)`` order with the 0-branch first; a later candidate replaces
    the incumbent only when it is better by more than ``tie_tol``.
    """
    options = BnbOptions() if options is None else options
    if state.N_b == 0:
        return state
    sub = options.branch_relaxed
    cur = state.solution
    best = None
    solved = state.solved
    for k, i, j in state.fractional:
        for value in (0, 1):
            pins = state.pins.add(k, i, j, value)
            m0 = _snap(cur.m, options.frac_tol)
            m0[k, i, j] = value
            sol = solve_relaxed(scenario, pins, sub, fixed_sizes=fixed_sizes,
                                warm_starts=[(m0, cur.s)])
            solved += 1
            score = sol.value if sol.feasible else np.inf
            if best is None or score < best[0] - options.tie_tol:
                best = (score, pins, sol)
    branches = state.branches + 2 * state.N_b
    score, pins, sol = best
    if not np.isfinite(score):
        return BnbState(state.pins, cur, state.fractional, state.p + 1, solved, branches, INFEASIBLE)
    return _state(pins, sol, options, state.p + 1, solved, branches)


def repair_capacity(scenario, m, s):
    """Remove round-off capacity excess from an integral placement.

    Excess volume on a server is moved from its cached packets to an
    uncached packet of the same file (rate unchanged), or, if the file has
    no uncached packet, trimmed from the cached packets down to ``r_min``.
    """
    m = np.asarray(m, dtype=bool)
    s = np.array(s, dtype=float)
    covered = m.any(axis=0)
    for k in range(scenario.K):
        for j in range(scenario.F):
            excess = float(np.einsum("ij,ij->", m[k], s)) - scenario.capacity[k]
            if excess <= 0:
                break
            on_k = m[k, :, j]
            vol = float(s[on_k, j].sum())
            if vol <= 0:
                continue
            free = np.flatnonzero(~covered[:, j])
            if free.size:
                take = min(excess, vol)
                s[on_k, j] *= 1.0 - take / vol
                s[free[0], j] += take
            else:
                room = s[:, j].sum() - scenario.r_min[j] * scenario.T_d
                take = min(excess, vol, max(room, 0.0))
                if take > 0:
                    s[on_k, j] *= 1.0 - take / vol
    return np.maximum(s, 0.0)


def solve_pinned(scenario, options=None, *, fixed_sizes=None, warm_starts=(), scheme="ec-ve"):
    """Run the pinning loop to an integral placement; returns ``(SolveResult, root, state)``."""
    check_scenario(scenario)
    options = BnbOptions() if options is None else options
    K, n, F = scenario.shape
    limit = K * n * F
    root = solve_relaxed(scenario, PinSet(), options.relaxed, fixed_sizes=fixed_sizes,
                         warm_starts=warm_starts)
    state = _state(PinSet(), root, options, 0, 1, 0)
    while state.status == FEASIBLE and state.N_b > 0 and state.p < limit:
        state = branch_step(state, scenario, options, fixed_sizes=fixed_sizes)

    counters = {
        "relaxed_solves": state.solved,
        "branches": state.branches,
        "branch_steps": state.p,
        "dimension": root.dimension,
        "iterations": root.iterations,
    }
    if state.status != FEASIBLE:
        reason = "relaxation infeasible" if state.p == 0 else "all branches infeasible"
        return infeasible(scheme, reason, counters, {"relaxed_status": state.status}), root, state
    if state.N_b > 0:
        return infeasible(scheme, "branch limit reached", counters,
                          {"relaxed_status": MAX_ITERS}), root, state

    m = np.rint(_snap(state.solution.m, options.frac_tol)).astype(bool)
    s = state.solution.s
    if fixed_sizes is None:
        # all cache entries fixed: re-optimise the sizes only
        polish = solve_relaxed(scenario, PinSet.from_array(m), options.relaxed,
                               warm_starts=[(m.astype(float), s)])
        counters["relaxed_solves"] += 1
        if polish.feasible and polish.value <= state.solution.value:
            s = polish.s
        s = repair_capacity(scenario, m, s)
    else:
        s = np.asarray(fixed_sizes, dtype=float)
    return evaluate(scenario, scheme, m, s, counters), root, state


def solve_ec_ve(scenario, options=None, *, initial=()):
    """Near-optimal joint placement and encoding plan.

    ``initial`` is an optional sequence of feasible :class:`SolveResult`
    objects.  They seed the root relaxation as starting points and are
    kept as incumbents, so the returned ``Q`` is never below theirs.
    """
    warm = [(np.asarray(r.placement, dtype=float), np.asarray(r.plan)) for r in initial
            if r is not None and r.feasible]
    result, root, state = solve_pinned(scenario, options, warm_starts=warm)
    root_Q = -root.value if root.feasible else float("nan")
    best = result
    for r in initial:
        best = better(best, r)
    counters = dict(result.counters)
    meta = dict(best.metadata)
    meta["root_Q"] = root_Q
    meta["source"] = "pinning" if best is result else f"initial:{best.scheme}"
    if best.feasible and best is not result:
        best = evaluate(scenario, "ec-ve", np.asarray(best.placement), np.asarray(best.plan),
                        counters, meta)
    else:
        best = replace(best, scheme="ec-ve", counters=counters, metadata=meta)
    return best
