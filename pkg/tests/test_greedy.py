import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecve import InvalidArgumentError, check_feasibility, objective
from ecve.bnb import BnbOptions
from ecve.greedy import GreedyOptions, default_step, solve_caching_fixed_rates, solve_greedy_ec_ve
from ecve.relaxed import RelaxedOptions
from helpers import make_scenario, tiny_config
from ecve import build_scenario

FAST = BnbOptions(relaxed=RelaxedOptions(n_starts=2), branch_starts=1)


def _reference_stepping(sc, m, step):
    """Plain-Python greedy over the package's objective; returns (grid index, Q history)."""
    t = np.zeros(sc.F, dtype=int)

    def plan(tt):
        r = np.minimum(sc.r_min + tt * step, sc.r_max)
        return np.tile(r * sc.T_d / sc.n, (sc.n, 1))

    q = objective(sc, m, plan(t)).total
    history = [q]
    while True:
        best_gain, best_j = 0.0, -1
        for j in range(sc.F):
            if sc.r_min[j] + (t[j] + 1) * step > sc.r_max[j] + 1e-12:
                continue
            t2 = t.copy()
            t2[j] += 1
            s2 = plan(t2)
            if not all(check_feasibility(sc, m, s2, tol=0.0).capacity_ok):
                continue
            gain = objective(sc, m, s2).total - q
            if gain > best_gain + 1e-12:
                best_gain, best_j = gain, j
        if best_j < 0:
            return t, history
        t[best_j] += 1
        q += best_gain
        history.append(q)


def test_default_step(table1):
    assert default_step(table1) == pytest.approx(1 / (2400 * 20))


@pytest.mark.parametrize("cap, psi", [(9000.0, 10.0), (14000.0, 100.0), (20000.0, 30.0)])
def test_greedy_matches_reference_stepping(cap, psi):
    sc = make_scenario(F=4, n=4, capacity_mb=cap, total_requests=psi)
    step = 0.05
    res = solve_greedy_ec_ve(sc, GreedyOptions(bnb=FAST, step=step))
    assert res.feasible
    m = np.asarray(res.placement)
    t, history = _reference_stepping(sc, m, step)
    assert res.rates(sc.T_d) == pytest.approx(np.minimum(sc.r_min + t * step, sc.r_max), abs=1e-9)
    assert all(b > a for a, b in zip(history, history[1:]))
    assert res.Q == pytest.approx(history[-1], abs=1e-9)
    assert res.counters["greedy_steps"] == len(history) - 1
    assert res.metadata["coarse_step"] is True


def test_rates_on_step_grid_and_caps(table1):
    sc = make_scenario(F=4, n=5, capacity_mb=15000.0, total_requests=50.0)
    res = solve_greedy_ec_ve(sc, GreedyOptions(bnb=FAST))
    step = default_step(sc)
    r = res.rates(sc.T_d)
    t = (r - sc.r_min) / step
    assert np.allclose(t, np.rint(t), atol=1e-6)
    assert np.all(r <= sc.r_max + 1e-12)
    n1 = int(np.sum(np.floor((sc.r_max - sc.r_min) / step + 1e-9)))
    assert res.counters["outer_passes"] <= n1 + 1
    assert res.counters["evaluations"] == res.counters["outer_passes"] * sc.F
    assert res.counters["dimension"] == sc.K * sc.n * sc.F
    assert res.metadata["coarse_step"] is False


def test_all_cached_at_minimum_when_capacity_is_exact(table1):
    sc = make_scenario(capacity_mb=26880.0)
    res = solve_caching_fixed_rates(sc, sc.r_min, FAST)
    assert res.feasible and np.asarray(res.placement).all()
    g = solve_greedy_ec_ve(sc, GreedyOptions(bnb=FAST))
    assert g.rates(sc.T_d) == pytest.approx(sc.r_min)
    assert g.mean_mos == pytest.approx(3.4402, abs=1e-4)


def test_zero_capacity_is_infeasible():
    sc = make_scenario(F=4, n=4, capacity_mb=0.0)
    assert not solve_caching_fixed_rates(sc, sc.r_min, FAST).feasible
    assert not solve_greedy_ec_ve(sc, GreedyOptions(bnb=FAST)).feasible


def test_single_file_with_one_request_caches_a_packet():
    sc = build_scenario(tiny_config(1, 3, 300.0, 1.0))
    res = solve_caching_fixed_rates(sc, sc.r_min, FAST)
    assert res.feasible and np.asarray(res.placement).sum() >= 1


def test_table1_lowest_capacity_greedy_infeasible():
    sc = make_scenario(capacity_mb=21540.0)
    assert not solve_greedy_ec_ve(sc, GreedyOptions(bnb=FAST)).feasible


def test_rates_validation():
    sc = make_scenario(F=4, n=2)
    with pytest.raises(InvalidArgumentError):
        solve_caching_fixed_rates(sc, sc.r_max + 1, FAST)
    with pytest.raises(InvalidArgumentError):
        solve_caching_fixed_rates(sc, [0.3], FAST)
    with pytest.raises(InvalidArgumentError):
        GreedyOptions(step=0.0)


@settings(max_examples=15, deadline=None)
@given(cap=st.floats(2000.0, 30000.0), psi=st.sampled_from([5.0, 20.0, 100.0]))
def test_greedy_never_below_its_starting_point(cap, psi):
    sc = make_scenario(F=4, n=3, capacity_mb=cap, total_requests=psi)
    start = solve_caching_fixed_rates(sc, sc.r_min, FAST)
    res = solve_greedy_ec_ve(sc, GreedyOptions(bnb=FAST, step=0.02))
    assert res.feasible == start.feasible
    if res.feasible:
        assert res.Q >= start.Q - 1e-12
        assert check_feasibility(sc, np.asarray(res.placement), np.asarray(res.plan)).feasible
