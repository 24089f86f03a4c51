import pytest
import yaml

from ecve.cli import main
from helpers import make_config, tiny_config


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(make_config(F=4, n=3, capacity_mb=15000.0, total_requests=10.0)))
    return path


def test_solve_writes_csv(config, tmp_path, capsys):
    out = tmp_path / "o.csv"
    assert main(["solve", str(config), "--scheme", "ve", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("axis,value,scheme,status")
    assert lines[1].split(",")[2:4] == ["ve", "feasible"]
    assert main(["solve", str(config), "--scheme", "ecst"]) == 0
    assert "ecst,feasible" in capsys.readouterr().out


def test_infeasible_exit_code(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(make_config(F=4, n=3, capacity_mb=100.0)))
    assert main(["solve", str(path), "--scheme", "ve"]) == 2
    assert main(["min-capacity", str(path), "--scheme", "ve", "--resolution", "1e9"]) == 0


def test_error_exit_codes(tmp_path, config):
    assert main(["solve", str(tmp_path / "missing.yaml")]) == 1
    assert main(["solve", str(config), "--scheme", "ec-bf"]) == 1
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump(make_config(n=0)))
    assert main(["solve", str(bad)]) == 1


def test_global_flags_before_or_after_command(config, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["--seed", "3", "--out", str(a), "solve", str(config), "--scheme", "greedy-ec-ve",
                 "--step", "0.05"]) == 0
    assert main(["solve", str(config), "--scheme", "greedy-ec-ve", "--seed", "3", "--step", "0.05",
                 "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_min_capacity_command(config, tmp_path):
    out = tmp_path / "m.csv"
    assert main(["min-capacity", str(config), "--scheme", "ve", "--resolution", "1",
                 "--out", str(out)]) == 0
    assert out.read_text() == "scheme,min_capacity_mb\nve,13440\n"


def test_sweep_and_oracle_commands(tmp_path):
    base = tmp_path / "base.yaml"
    base.write_text(yaml.safe_dump(make_config(F=4, n=2, total_requests=10.0)))
    spec = tmp_path / "s.yaml"
    spec.write_text(yaml.safe_dump({"base": "base.yaml", "axis": "capacity",
                                    "values": [6000, 14000], "schemes": ["ve", "ecst"]}))
    out = tmp_path / "s.csv"
    assert main(["sweep", str(spec), "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 5

    tiny = tmp_path / "t.yaml"
    tiny.write_text(yaml.safe_dump(tiny_config(2, 2, 6000.0, 5.0)))
    out = tmp_path / "o.csv"
    assert main(["oracle-check", str(tiny), "--grid", "5", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "scheme,status,Q,snapped_Q,oracle_Q"
    for line in lines[1:]:
        _, status, q, snapped, oracle = line.split(",")
        assert status == "feasible" and float(snapped) <= float(oracle) + 1e-3
