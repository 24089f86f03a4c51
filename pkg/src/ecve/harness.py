"""Experiment sweeps, minimum-capacity search and CSV output."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .catalog import build_scenario, load_config, with_overrides
from .results import FEASIBLE, INFEASIBLE
from .schemes import SchemeOptions, check_scheme, solve
from .validation import InvalidArgumentError, check_positive

AXES = ("capacity", "num_files", "num_packets", "num_servers", "total_requests")
_INT_AXES = {"num_files", "num_packets", "num_servers"}


def sig6(x):
    """Round to 6 significant digits (the CSV precision)."""
    return float(f"{x:.6g}")


@dataclass(frozen=True)
class SweepSpec:
    """One experiment: a base config, an axis with its values, and the schemes to run.

    For the ``num_servers`` axis, ``capacities`` may give the per-server
    capacity list of every point; otherwise the base config's first
    capacity is repeated.
    """

    base: dict = field(repr=False)
    axis: str
    values: tuple
    schemes: tuple = ("ec-ve", "greedy-ec-ve", "ecst", "ec", "ve")
    options: dict = field(default_factory=dict, repr=False)
    seed: int = 0
    capacities: tuple | None = None

    def __post_init__(self):
        if self.axis not in AXES:
            raise InvalidArgumentError(f"unknown axis {self.axis!r}; choose from {list(AXES)}", "axis")
        values = tuple(self.values)
        if not values:
            raise InvalidArgumentError("need at least one value", "values")
        for v in values:
            check_positive(v, "values")
            if self.axis in _INT_AXES and int(v) != v:
                raise InvalidArgumentError(f"{self.axis} values must be integers", "values")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise InvalidArgumentError("values must be strictly increasing", "values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "schemes", tuple(check_scheme(s) for s in self.schemes))
        for name, opts in self.options.items():
            check_scheme(name)
            SchemeOptions.from_mapping(opts)
        if self.capacities is not None:
            if self.axis != "num_servers" or len(self.capacities) != len(values):
                raise InvalidArgumentError("one capacity list per num_servers value", "capacities")
            caps = tuple(tuple(float(c) for c in row) for row in self.capacities)
            for v, row in zip(values, caps):
                if len(row) != int(v):
                    raise InvalidArgumentError(f"expected {int(v)} capacities for K={int(v)}",
                                               "capacities")
            object.__setattr__(self, "capacities", caps)

    @classmethod
    def from_mapping(cls, data, base_dir=None):
        data = dict(data)
        base = data.pop("base", None)
        if isinstance(base, str):
            path = Path(base)
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            base = load_config(path)
        if not isinstance(base, dict):
            raise InvalidArgumentError("expected a config mapping or a path", "base")
        known = {f.name for f in fields(cls)} - {"base"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InvalidArgumentError(f"unknown key(s) {unknown}", "sweep")
        for key in ("axis", "values"):
            if key not in data:
                raise InvalidArgumentError("missing required key", key)
        if "schemes" in data:
            data["schemes"] = tuple(data["schemes"])
        if data.get("capacities") is not None:
            data["capacities"] = tuple(tuple(row) for row in data["capacities"])
        return cls(base=base, **data)

    def point_config(self, index):
        value = self.values[index]
        cfg = with_overrides(self.base)
        if self.axis == "capacity":
            cfg["capacities_mb"] = [float(value)] * int(cfg["K"])
        elif self.axis == "num_files":
            cfg["F"] = int(value)
        elif self.axis == "num_packets":
            cfg["n"] = int(value)
        elif self.axis == "num_servers":
            cfg["K"] = int(value)
            if self.capacities is not None:
                cfg["capacities_mb"] = list(self.capacities[index])
            else:
                caps = cfg["capacities_mb"]
                first = caps[0] if isinstance(caps, (list, tuple)) else caps
                cfg["capacities_mb"] = [float(first)] * int(value)
        else:
            cfg["total_requests"] = float(value)
        return cfg

    def scheme_options(self, scheme, **overrides):
        opts = dict(self.options.get(scheme, {}))
        opts.setdefault("seed", self.seed)
        return SchemeOptions.from_mapping(opts, **overrides)


def load_sweep(path):
    """Read a YAML sweep spec; a string ``base`` is a config path relative to the spec."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise InvalidArgumentError(f"cannot parse {path}: {exc}", "sweep") from None
    if not isinstance(data, dict):
        raise InvalidArgumentError(f"{path} must hold a mapping", "sweep")
    return SweepSpec.from_mapping(data, base_dir=path.parent)


@dataclass(frozen=True)
class ResultRow:
    """One CSV row; infeasible rows leave the MOS, Q and latency fields empty."""

    axis: str
    value: float
    scheme: str
    status: str
    mean_mos: float | None
    Q: float | None
    latency_s: float | None
    relaxed_solves: int
    branches: int
    greedy_steps: int

    @classmethod
    def from_result(cls, axis, value, result):
        c = result.counters
        ok = result.feasible
        return cls(
            axis=axis,
            value=sig6(value),
            scheme=result.scheme,
            status=FEASIBLE if ok else INFEASIBLE,
            mean_mos=sig6(result.mean_mos) if ok else None,
            Q=sig6(result.Q) if ok else None,
            latency_s=sig6(result.latency_s) if ok else None,
            relaxed_solves=int(c.get("relaxed_solves", 0)),
            branches=int(c.get("branches", 0)),
            greedy_steps=int(c.get("greedy_steps", 0)),
        )


CSV_FIELDS = tuple(f.name for f in fields(ResultRow))
_FLOATS = ("value", "mean_mos", "Q", "latency_s")
_INTS = ("relaxed_solves", "branches", "greedy_steps")


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def write_csv(rows, out=None):
    """Write rows as CSV to ``out`` (path or text stream); returns the CSV text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for row in rows:
        writer.writerow([_fmt(getattr(row, name)) for name in CSV_FIELDS])
    text = buf.getvalue()
    if isinstance(out, (str, Path)):
        Path(out).write_text(text)
    elif out is not None:
        out.write(text)
    return text


def read_csv(source):
    """Parse CSV text, a path or a stream back into :class:`ResultRow` objects."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        text = Path(source).read_text()
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_FIELDS:
        raise InvalidArgumentError(f"unexpected header {reader.fieldnames}", "csv")
    rows = []
    for rec in reader:
        kw = dict(rec)
        for name in _FLOATS:
            kw[name] = float(kw[name]) if kw[name] != "" else None
        for name in _INTS:
            kw[name] = int(kw[name])
        rows.append(ResultRow(**kw))
    return rows


def run_sweep(spec, *, step=None):
    """Solve every (axis value, scheme) pair; rows ordered by value, then scheme name."""
    rows = []
    for idx, value in enumerate(spec.values):
        scenario = build_scenario(spec.point_config(idx))
        for scheme in spec.schemes:
            result = solve(scenario, scheme, spec.scheme_options(scheme, step=step))
            rows.append(ResultRow.from_result(spec.axis, value, result))
    rows.sort(key=lambda r: (r.value, r.scheme))
    return rows


def min_capacity(config, scheme, resolution=1.0, options=None, *, max_iter=40, probes=None):
    """Smallest uniform per-server capacity (a multiple of ``resolution``) the scheme solves.

    Bisection on ``[0, 2 * sum_j r_max_j * T_d]``.  Returns ``None`` when the
    scheme is infeasible even at the upper end.  ``probes``, if a list, is
    filled with ``(capacity, feasible)`` pairs in probe order.
    """
    check_scheme(scheme)
    check_positive(resolution, "resolution")
    options = SchemeOptions() if options is None else options
    base = build_scenario(config)
    K = base.K
    top = 2.0 * float(np.sum(base.r_max * base.T_d))
    probes = [] if probes is None else probes

    def feasible(i):
        cap = i * resolution
        sc = build_scenario(with_overrides(config, capacities_mb=[cap] * K))
        ok = solve(sc, scheme, options).feasible
        probes.append((cap, ok))
        return ok

    hi = int(math.ceil(top / resolution))
    if not feasible(hi):
        return None
    lo = 0
    if feasible(lo):
        return 0.0
    for _ in range(max_iter):
        if hi - lo <= 1:
            break
        mid = (lo + hi) // 2
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi * resolution
