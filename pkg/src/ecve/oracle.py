"""Exhaustive ground truth for tiny instances.

Every binary placement is combined with every point of a per-file uniform
rate grid (equal packet sizes).  The lattice optimum bounds what any solver
can reach with equal sizes on the same grid.
"""
from __future__ import annotations

import itertools

import numpy as np

from .qoe import secure_lower_bound
from .results import evaluate, infeasible
from .validation import InvalidArgumentError, check_positive_int, check_scenario

MAX_BITS = 22
MAX_POINTS = 2 ** 32
_CHUNK = 1 << 14


def rate_grid(scenario, points):
    """``(F, points)`` array of uniformly spaced rates on ``[r_min, r_max]``."""
    points = check_positive_int(points, "rate_grid_points")
    return np.linspace(scenario.r_min, scenario.r_max, points).T


def _placements(bits, start, stop, shape):
    idx = np.arange(start, stop, dtype=np.int64)
    flat = ((idx[:, None] >> np.arange(bits, dtype=np.int64)) & 1).astype(bool)
    return flat.reshape((stop - start,) + shape)


def oracle_solve(scenario, rate_grid_points=11):
    """Best lattice point by exhaustive enumeration.

    Placement ``b`` sets flat cache entry ``t`` (C order over ``(k, i, j)``)
    to bit ``t`` of ``b``.  Ties on ``Q`` go to the smallest placement index,
    then the smallest rate index.
    """
    check_scenario(scenario)
    K, n, F = scenario.shape
    bits = K * n * F
    if bits > MAX_BITS:
        raise InvalidArgumentError(f"K*n*F={bits} exceeds the enumeration budget of {MAX_BITS}",
                                   "scenario")
    grid = rate_grid(scenario, rate_grid_points)
    G = grid.shape[1]
    n_place = 1 << bits
    n_rates = G ** F
    if n_place * n_rates > MAX_POINTS:
        raise InvalidArgumentError(f"{n_place * n_rates} lattice points exceed {MAX_POINTS}",
                                   "rate_grid_points")

    need = secure_lower_bound(n, scenario.requests)
    w = scenario.popularity / scenario.R_bk
    combos = [np.array(c) for c in itertools.product(range(G), repeat=F)]
    best_q, best_key = -np.inf, None
    for start in range(0, n_place, _CHUNK):
        stop = min(start + _CHUNK, n_place)
        m = _placements(bits, start, stop, (K, n, F))
        per_server = m.sum(axis=2)                  # (B, K, F)
        totals = per_server.sum(axis=1)             # (B, F)
        ok = np.all((totals <= n + 1e-6) & (totals >= need - 1e-6), axis=1)
        missing = np.maximum(n - totals, 0)
        for r_idx, combo in enumerate(combos):
            rates = grid[np.arange(F), combo]
            size = rates * scenario.T_d / n
            load = per_server @ size                # (B, K)
            feas = ok & np.all(load <= scenario.capacity + 1e-6, axis=1)
            if not feas.any():
                continue
            f = ((scenario.coeffs[:, 0] * rates + scenario.coeffs[:, 1]) * rates
                 + scenario.coeffs[:, 2]) * rates + scenario.coeffs[:, 3]
            g = scenario.v * np.cbrt(w * missing * size) ** 2
            q = np.where(feas, f.sum() - g.sum(axis=1), -np.inf)
            b = int(np.argmax(q))
            key = (start + b, r_idx)
            if q[b] > best_q or (q[b] == best_q and best_key is not None and key < best_key):
                best_q, best_key = float(q[b]), key

    counters = {"lattice_points": n_place * n_rates, "placements": n_place, "rate_points": n_rates}
    if best_key is None:
        return infeasible("oracle", "no lattice point is feasible", counters)
    p_idx, r_idx = best_key
    m = _placements(bits, p_idx, p_idx + 1, (K, n, F))[0]
    rates = grid[np.arange(F), combos[r_idx]]
    s = np.tile(rates * scenario.T_d / n, (n, 1))
    return evaluate(scenario, "oracle", m, s, counters)


def snap_to_grid(scenario, result, rate_grid_points=11):
    """Re-evaluate ``result`` on the oracle lattice.

    Rates are rounded down to the grid with equal packet sizes and the same
    placement.  If that point is infeasible, the best feasible grid point at
    or below the rounded rates is used instead.
    """
    if not result.feasible:
        return result
    grid = rate_grid(scenario, rate_grid_points)
    G = grid.shape[1]
    m = np.asarray(result.placement, dtype=bool)
    rates = result.plan.rates(scenario.T_d)
    top = np.array([int(np.searchsorted(grid[j], rates[j] + 1e-9, side="right")) - 1
                    for j in range(scenario.F)])
    top = np.clip(top, 0, G - 1)
    best = None
    for combo in itertools.product(*[range(t, -1, -1) for t in top]):
        r = grid[np.arange(scenario.F), combo]
        cand = evaluate(scenario, result.scheme, m, np.tile(r * scenario.T_d / scenario.n,
                                                            (scenario.n, 1)))
        if cand.feasible and (best is None or cand.Q > best.Q):
            best = cand
        if best is not None and combo == tuple(top):
            break
    if best is None:
        return infeasible(result.scheme, "no feasible grid point at or below the solution rates")
    return best
