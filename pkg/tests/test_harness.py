import io

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from ecve import InvalidArgumentError, SweepSpec, load_sweep, min_capacity, read_csv, run_sweep, write_csv
from ecve.harness import CSV_FIELDS, ResultRow, sig6
from ecve.schemes import SchemeOptions, check_scheme, solve
from helpers import make_config, make_scenario


def _small_base():
    return make_config(F=4, n=3, capacity_mb=10000.0, total_requests=10.0)


FAST = {"n_starts": 2, "branch_starts": 1}


def _spec(**kw):
    args = dict(base=_small_base(), axis="capacity", values=(6000.0, 12000.0, 30000.0),
                schemes=("ec-ve", "greedy-ec-ve", "ecst", "ec", "ve"),
                options={s: FAST for s in ("ec-ve", "greedy-ec-ve", "ec")})
    args.update(kw)
    return SweepSpec(**args)


def test_spec_validation():
    with pytest.raises(InvalidArgumentError):
        _spec(axis="bandwidth")
    with pytest.raises(InvalidArgumentError):
        _spec(values=(2.0, 1.0))
    with pytest.raises(InvalidArgumentError):
        _spec(values=(0.0, 1.0))
    with pytest.raises(InvalidArgumentError):
        _spec(schemes=("ec-ve", "bf"))
    with pytest.raises(InvalidArgumentError):
        _spec(axis="num_packets", values=(2.5,))
    with pytest.raises(InvalidArgumentError):
        _spec(options={"ec-ve": {"bogus": 1}})
    with pytest.raises(InvalidArgumentError):
        check_scheme("ec-tm")


@pytest.fixture(scope="module")
def sweep_rows():
    return run_sweep(_spec())


def test_sweep_rows_ordered_and_complete(sweep_rows):
    keys = [(r.value, r.scheme) for r in sweep_rows]
    assert keys == sorted(keys)
    assert len(sweep_rows) == 3 * 5
    for r in sweep_rows:
        if r.status == "infeasible":
            assert r.mean_mos is None and r.Q is None and r.latency_s is None


def test_capacity_sweep_trends(sweep_rows):
    ecve = [r for r in sweep_rows if r.scheme == "ec-ve"]
    assert all(r.status == "feasible" for r in ecve)
    assert all(b.mean_mos >= a.mean_mos - 1e-6 for a, b in zip(ecve, ecve[1:]))
    assert all(b.latency_s <= a.latency_s + 1e-6 for a, b in zip(ecve, ecve[1:]))


def test_csv_round_trip(sweep_rows, tmp_path):
    text = write_csv(sweep_rows)
    assert text.splitlines()[0] == ",".join(CSV_FIELDS)
    assert read_csv(text) == sweep_rows
    path = tmp_path / "out.csv"
    write_csv(sweep_rows, path)
    assert read_csv(path) == sweep_rows
    buf = io.StringIO()
    write_csv(sweep_rows, buf)
    assert buf.getvalue() == text
    with pytest.raises(InvalidArgumentError):
        read_csv("a,b\n1,2\n")


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-6, 1e9, allow_nan=False), st.integers(0, 10 ** 6))
def test_row_round_trip_property(x, k):
    row = ResultRow("capacity", sig6(x), "ec-ve", "feasible", sig6(x / 7), sig6(x * 3), sig6(x),
                    k, k, k)
    assert read_csv(write_csv([row])) == [row]


def test_sweep_reproducible():
    spec = _spec(values=(8000.0,), schemes=("ec-ve", "greedy-ec-ve"))
    assert write_csv(run_sweep(spec)) == write_csv(run_sweep(spec))


def test_other_axes_build_points():
    spec = _spec(axis="num_servers", values=(1, 2), capacities=((5000.0,), (3000.0, 2000.0)),
                 schemes=("ve",))
    assert spec.point_config(1)["capacities_mb"] == [3000.0, 2000.0]
    assert spec.point_config(1)["K"] == 2
    rows = run_sweep(spec)
    assert [r.value for r in rows] == [1.0, 2.0]
    assert _spec(axis="num_files", values=(4, 8)).point_config(1)["F"] == 8
    assert _spec(axis="num_packets", values=(2, 3)).point_config(0)["n"] == 2
    assert _spec(axis="total_requests", values=(10, 20)).point_config(1)["total_requests"] == 20.0
    with pytest.raises(InvalidArgumentError):
        _spec(axis="num_servers", values=(1, 2), capacities=((1.0,), (1.0,)))


def test_load_sweep_relative_base(tmp_path):
    (tmp_path / "base.yaml").write_text(yaml.safe_dump(_small_base()))
    (tmp_path / "sweep.yaml").write_text(yaml.safe_dump(
        {"base": "base.yaml", "axis": "capacity", "values": [1000, 2000], "schemes": ["ve"]}))
    spec = load_sweep(tmp_path / "sweep.yaml")
    assert spec.values == (1000, 2000) and spec.schemes == ("ve",)
    (tmp_path / "bad.yaml").write_text(yaml.safe_dump({"base": "base.yaml", "axis": "capacity"}))
    with pytest.raises(InvalidArgumentError):
        load_sweep(tmp_path / "bad.yaml")


def test_min_capacity_ve_equals_minimum_volume():
    cfg = make_config(n=10)
    assert min_capacity(cfg, "ve", 1.0) == 26880.0
    for psi in (10.0, 130.0):
        cfg = make_config(F=4, n=3, total_requests=psi)
        assert min_capacity(cfg, "ve", 1.0) == pytest.approx(2400 * 5.6)


def test_min_capacity_probe_log_is_consistent():
    probes = []
    cap = min_capacity(make_config(F=4, n=3, total_requests=20.0), "ec", 10.0,
                       SchemeOptions(**FAST), probes=probes)
    feasible = sorted(c for c, ok in probes if ok)
    infeasible = sorted(c for c, ok in probes if not ok)
    assert cap == feasible[0]
    assert not infeasible or infeasible[-1] < cap
    assert cap - infeasible[-1] <= 10.0 + 1e-9


def test_counters_match_structure():
    sc = make_scenario(F=4, n=3, capacity_mb=12000.0, total_requests=10.0)
    ec_ve = solve(sc, "ec-ve", SchemeOptions(**FAST))
    assert ec_ve.counters["dimension"] == (sc.K + 1) * sc.n * sc.F
    greedy = solve(sc, "greedy-ec-ve", SchemeOptions(**FAST))
    assert greedy.counters["dimension"] == sc.K * sc.n * sc.F
    assert greedy.counters["evaluations"] == greedy.counters["outer_passes"] * sc.F


def test_scheme_options_mapping():
    opts = SchemeOptions.from_mapping({"n_starts": 3}, seed=5, step=None)
    assert opts.n_starts == 3 and opts.seed == 5 and opts.step is None
    assert SchemeOptions.from_mapping(opts.to_dict()) == opts
    with pytest.raises(InvalidArgumentError):
        SchemeOptions.from_mapping({"n_start": 3})
    with pytest.raises(InvalidArgumentError):
        SchemeOptions(n_starts=0)
