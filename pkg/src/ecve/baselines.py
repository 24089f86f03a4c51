"""Comparison schemes: ECST-like fixed-rate caching, caching only, encoding only."""
from __future__ import annotations

import numpy as np

from ._fill import equal_count_fill
from .greedy import _check_rates, solve_caching_fixed_rates
from .results import evaluate, infeasible
from .validation import InvalidArgumentError, check_scenario

RATE_PRESETS = {
    "r_min": 0.0,
    "tenth": 0.1,
    "twentieth": 0.05,
    "half": 0.5,
}


def preset_rates(scenario, rule):
    """Fixed per-file rates from a preset name, a callable or an explicit vector."""
    if isinstance(rule, str):
        if rule not in RATE_PRESETS:
            raise InvalidArgumentError(f"unknown preset {rule!r}; choose from {sorted(RATE_PRESETS)}",
                                       "rate_rule")
        frac = RATE_PRESETS[rule]
        return scenario.r_min + frac * (scenario.r_max - scenario.r_min)
    if callable(rule):
        return _check_rates(scenario, [rule(f) for f in scenario.files])
    return _check_rates(scenario, rule)


def solve_ecst(scenario, rate_rule="r_min"):
    """Backhaul-minimising fixed-rate caching with equal per-server counts.

    This is a reconstruction: each server stores the same number of
    packets of a file, chosen greedily by descending ``Psi_j * size_j``.
    """
    check_scenario(scenario)
    rates = preset_rates(scenario, rate_rule)
    m = equal_count_fill(scenario, rates)
    if m is None:
        return infeasible("ecst", "secrecy minimum does not fit under equal per-server counts")
    s = np.tile(rates * scenario.T_d / scenario.n, (scenario.n, 1))
    return evaluate(scenario, "ecst", m, s, metadata={"rate_rule": str(rate_rule)})


def solve_ec_only(scenario, options=None):
    """Caching only: rates frozen at ``r_min``, placement optimised."""
    return solve_caching_fixed_rates(scenario, scenario.r_min, options, scheme="ec")


def _best_rate(c, lam, lo, hi):
    """Maximiser of ``f(r) - lam * r`` on ``[lo, hi]`` for the cubic ``c`` (smallest on ties)."""
    cands = [lo, hi]
    a, b, d = 3.0 * c[0], 2.0 * c[1], c[2] - lam
    if abs(a) > 1e-15:
        disc = b * b - 4.0 * a * d
        if disc >= 0:
            root = np.sqrt(disc)
            cands += [(-b - root) / (2 * a), (-b + root) / (2 * a)]
    elif abs(b) > 1e-15:
        cands.append(-d / b)
    best_r, best_v = lo, -np.inf
    for r in sorted(min(max(x, lo), hi) for x in cands):
        val = ((c[0] * r + c[1]) * r + c[2]) * r + c[3] - lam * r
        if val > best_v + 1e-15:
            best_r, best_v = r, val
    return best_r


def _ve_rates(scenario, budget):
    """Rates maximising total MOS with total encoded volume at most ``budget`` Mb."""
    T_d, c = scenario.T_d, scenario.coeffs
    lo, hi = scenario.r_min, scenario.r_max

    def rates_at(lam):
        return np.array([_best_rate(c[j], lam, lo[j], hi[j]) for j in range(scenario.F)])

    r = rates_at(0.0)
    if r.sum() * T_d <= budget:
        return r
    # per-Mbps multiplier on the volume budget, by bisection
    grid = np.linspace(lo, hi, 201)
    slope = 3 * c[:, 0] * grid ** 2 + 2 * c[:, 1] * grid + c[:, 2]
    lam_lo, lam_hi = 0.0, float(np.abs(slope).max()) + 1.0
    for _ in range(200):
        mid = 0.5 * (lam_lo + lam_hi)
        if rates_at(mid).sum() * T_d > budget:
            lam_lo = mid
        else:
            lam_hi = mid
    r = rates_at(lam_hi)
    # spend what the multiplier left unused, steepest file first
    left = budget - r.sum() * T_d
    while left > 1e-9:
        room = r < hi - 1e-15
        if not room.any():
            break
        grad = np.where(room, 3 * c[:, 0] * r ** 2 + 2 * c[:, 1] * r + c[:, 2], -np.inf)
        j = int(np.argmax(grad))
        add = min(hi[j] - r[j], left / T_d)
        r[j] += add
        left -= add * T_d
    return r


def _first_fit(scenario, rates):
    """Every packet cached once, first server (by index) with room; ``None`` if it fails."""
    K, n, F = scenario.shape
    size = rates * scenario.T_d / n
    room = scenario.capacity.astype(float).copy()
    m = np.zeros((K, n, F), dtype=bool)
    for j in range(F):
        for i in range(n):
            for k in range(K):
                if room[k] >= size[j] - 1e-9:
                    m[k, i, j] = True
                    room[k] -= size[j]
                    break
            else:
                return None
    return m


def solve_ve_only(scenario):
    """Encoding only: every packet cached, rates raised as far as capacity allows."""
    check_scenario(scenario)
    total = float(scenario.capacity.sum())
    floor = float(np.sum(scenario.r_min * scenario.T_d))
    if floor > total + 1e-6:
        return infeasible("ve", "r_min volume exceeds total capacity")
    if _first_fit(scenario, scenario.r_min) is None:
        return infeasible("ve", "packets at r_min do not pack onto the servers")
    budget = total
    rates = _ve_rates(scenario, budget)
    m = _first_fit(scenario, rates)
    if m is None:
        # shrink the volume budget until the packets pack
        lo_b, hi_b = floor, budget
        for _ in range(60):
            mid = 0.5 * (lo_b + hi_b)
            if _first_fit(scenario, _ve_rates(scenario, mid)) is None:
                hi_b = mid
            else:
                lo_b = mid
        rates = _ve_rates(scenario, lo_b)
        m = _first_fit(scenario, rates)
    s = np.tile(rates * scenario.T_d / scenario.n, (scenario.n, 1))
    return evaluate(scenario, "ve", m, s)
