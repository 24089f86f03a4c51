import numpy as np
import pytest

from ecve import build_scenario, check_feasibility, table1_config
from ecve.bnb import BnbOptions, BnbState, branch_step, repair_capacity, solve_ec_ve, solve_pinned
from ecve.relaxed import FEASIBLE, INFEASIBLE, PinSet, RelaxedOptions, RelaxedSolution, solve_relaxed
from ecve.schemes import solve
from helpers import make_scenario, tiny_config

FAST = BnbOptions(relaxed=RelaxedOptions(n_starts=4))


def _fake_state(m, s, fractional, pins=PinSet()):
    sol = RelaxedSolution(np.asarray(m, float), np.asarray(s, float), 0.0, FEASIBLE, 0, 0.0,
                          0, 0, 1, True, np.size(m))
    return BnbState(pins, sol, tuple(fractional))


def test_branch_step_without_fractional_entries_is_a_no_op():
    sc = build_scenario(tiny_config(1, 2, 1000.0, 1.0))
    state = _fake_state(np.ones(sc.shape), np.ones((2, 1)), ())
    assert branch_step(state, sc, FAST) is state


def _one_packet_room():
    # equal frozen sizes, room for exactly one of the two packets
    sc = build_scenario(tiny_config(1, 2, 360.0, 1.0))
    sizes = np.full((2, 1), sc.r_min[0] * sc.T_d / 2)
    return sc, sizes


def test_infeasible_one_branch_loses():
    sc, sizes = _one_packet_room()
    pins = PinSet(((0, 0, 0, 1),))
    state = _fake_state([[[1.0], [0.5]]], sizes, [(0, 1, 0)], pins)
    assert solve_relaxed(sc, pins.add(0, 1, 0, 1), FAST.relaxed, fixed_sizes=sizes).status == INFEASIBLE
    nxt = branch_step(state, sc, FAST, fixed_sizes=sizes)
    assert nxt.status == FEASIBLE
    assert (0, 1, 0, 0) in nxt.pins.entries
    assert nxt.N_b == 0 and nxt.p == 1 and nxt.branches == 2


def test_adopted_branch_is_the_better_one():
    sc = build_scenario(tiny_config(1, 2, 600.0, 1.5))
    state = _fake_state([[[0.5], [0.5]]], np.full((2, 1), 300.0), [(0, 0, 0)])
    nxt = branch_step(state, sc, FAST)
    values = []
    for v in (0, 1):
        m0 = np.array([[[0.5], [0.5]]])
        m0[0, 0, 0] = v
        sol = solve_relaxed(sc, PinSet(((0, 0, 0, v),)), FAST.relaxed,
                            warm_starts=[(m0, state.solution.s)])
        values.append(sol.value if sol.feasible else np.inf)
    assert nxt.solution.value == pytest.approx(min(values), abs=1e-12)
    assert nxt.solution.value <= max(values)


def test_all_branches_infeasible_reports_infeasible():
    sc, sizes = _one_packet_room()
    # pinning the first packet to 0 while the second is also pinned out
    pins = PinSet(((0, 1, 0, 0),))
    state = _fake_state([[[0.5], [0.0]]], sizes, [(0, 0, 0)], pins)
    sc2 = build_scenario(tiny_config(1, 2, 100.0, 1.0))
    nxt = branch_step(state, sc2, FAST, fixed_sizes=sizes)
    assert nxt.status == INFEASIBLE


def test_ample_capacity_caches_everything_at_top_rate():
    sc = make_scenario(F=4, n=4, capacity_mb=69660.0)
    res = solve_ec_ve(sc, FAST)
    assert res.feasible
    assert np.asarray(res.placement).all()
    assert res.rates(sc.T_d) == pytest.approx(sc.r_max, abs=1e-6)


def test_security_minimum_beyond_capacity_is_infeasible():
    sc = build_scenario(tiny_config(1, 2, 700.0, 2.0))
    # two packets must be cached, i.e. the whole file at >= 0.3 Mbps = 720 Mb
    res = solve_ec_ve(sc, FAST)
    assert not res.feasible and res.placement is None


@pytest.fixture(scope="module")
def partial():
    sc = make_scenario(F=4, n=4, K=1, capacity_mb=2500.0, total_requests=10.0)
    result, root, state = solve_pinned(sc, FAST)
    return sc, result, root, state


def test_pinned_result_is_integral_and_feasible(partial):
    sc, result, root, state = partial
    assert result.feasible
    m = np.asarray(result.placement)
    assert np.all((m == 0) | (m == 1))
    assert check_feasibility(sc, m, np.asarray(result.plan)).feasible
    assert result.Q == pytest.approx(-result.Q_min)


def test_iteration_bound_and_counters(partial):
    sc, result, root, state = partial
    K, n, F = sc.shape
    assert state.p <= K * n * F
    assert result.counters["branch_steps"] == state.p
    assert result.counters["dimension"] == (K + 1) * n * F
    assert result.counters["relaxed_solves"] == 1 + state.branches + 1


def test_root_relaxation_bounds_result(partial):
    sc, result, root, state = partial
    assert -root.value >= result.Q - 1e-3


def test_initial_results_are_kept_as_incumbents():
    sc = make_scenario(F=4, n=4, capacity_mb=9000.0, total_requests=10.0)
    seeds = [solve(sc, s) for s in ("greedy-ec-ve", "ve", "ecst")]
    res = solve_ec_ve(sc, FAST, initial=seeds)
    for r in seeds:
        if r.feasible:
            assert res.Q >= r.Q - 1e-9
    assert "root_Q" in res.metadata and res.scheme == "ec-ve"


def test_repair_capacity_moves_excess_to_uncached_packet():
    sc = make_scenario(F=4, n=2, capacity_mb=1500.0, class_map=[0] * 4)
    m = np.zeros(sc.shape, dtype=bool)
    m[0, 0, :] = True
    s = np.full((2, 4), 360.0)
    s[0, 0] = 1500.0 - 3 * 360.0 + 1e-3  # server overloaded by 1e-3 Mb
    out = repair_capacity(sc, m, s)
    assert np.einsum("kij,ij->k", m, out)[0] <= 1500.0 + 1e-9
    assert out.sum(axis=0) == pytest.approx(s.sum(axis=0), abs=1e-12)


def test_two_server_pinning_counts():
    sc = make_scenario(F=4, n=2, K=2, capacity_mb=600.0, total_requests=4.0, class_map=[0] * 4)
    result, root, state = solve_pinned(sc, BnbOptions(relaxed=RelaxedOptions(n_starts=2),
                                                      branch_starts=1))
    assert result.feasible
    assert result.counters["dimension"] == 3 * 2 * 4
    assert state.p <= 2 * 2 * 4
    assert check_feasibility(sc, np.asarray(result.placement), np.asarray(result.plan)).feasible
