"""Problem instances: video catalog, Zipf popularity, servers and requests.

A scenario is built from a plain config mapping (usually parsed from YAML)::

    F: 8                    # number of video files
    n: 20                   # packets per file
    K: 1                    # edge servers
    capacities_mb: [26880]  # one entry per server (a scalar is broadcast)
    T_d_s: 2400             # file duration, seconds
    R_bk_mbps: 1250         # backhaul rate; omitted -> 10000 / F (10 Gbps shared)
    total_requests: 100
    theta: 0.8              # Zipf tilt, 0 < theta < 1
    classes:                # rate ranges and MOS coefficients per class
      - {count: 4, r_min: 0.3, r_max: 0.7, c1: 0.23, c2: -1.5, c3: 3.3, c4: 2.5, v: 0.99}
      - ...
    class_map: [0, 0, 1, ...]   # optional per-file class index (0-based)

When ``count`` is omitted on the three default classes the files are split
half / quarter / remainder in popularity order.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import yaml

from .validation import InvalidArgumentError, check_positive, check_positive_int

TABLE1_CLASSES = (
    {"r_min": 0.3, "r_max": 0.7, "c1": 0.23, "c2": -1.5, "c3": 3.3, "c4": 2.5, "v": 0.99},
    {"r_min": 1.0, "r_max": 4.0, "c1": 0.0426, "c2": -0.4466, "c3": 1.6369, "c4": 1.8415, "v": 0.99},
    {"r_min": 4.0, "r_max": 8.0, "c1": 0.0027, "c2": -0.0669, "c3": 0.5842, "c4": 2.5248, "v": 0.99},
)

# Request count used when a config does not name one; see README.
DEFAULT_TOTAL_REQUESTS = 100.0


def table1_config(F=8, n=20, K=1, capacity_mb=26880.0, total_requests=DEFAULT_TOTAL_REQUESTS):
    """Config mapping for the three-class catalog used throughout the experiments."""
    caps = capacity_mb if isinstance(capacity_mb, (list, tuple)) else [capacity_mb] * K
    return {
        "F": F,
        "n": n,
        "K": K,
        "capacities_mb": [float(c) for c in caps],
        "T_d_s": 2400.0,
        "total_requests": float(total_requests),
        "theta": 0.8,
        "classes": [dict(c) for c in TABLE1_CLASSES],
    }


@dataclass(frozen=True)
class VideoFile:
    """One video in the catalog; ``index`` is its 1-based popularity rank."""

    index: int
    r_min: float
    r_max: float
    c1: float
    c2: float
    c3: float
    c4: float
    v: float
    popularity: float
    requests: float
    video_class: int = 0

    def __post_init__(self):
        if not 0 < self.r_min <= self.r_max:
            raise InvalidArgumentError(
                f"need 0 < r_min <= r_max, got r_min={self.r_min}, r_max={self.r_max}",
                "r_min",
            )

    def quality(self, rate):
        """MOS polynomial evaluated at ``rate`` (Mbps)."""
        return ((self.c1 * rate + self.c2) * rate + self.c3) * rate + self.c4


@dataclass(frozen=True)
class Scenario:
    files: tuple
    n: int
    K: int
    capacities: tuple
    T_d: float
    R_bk: float
    total_requests: float
    theta: float

    @property
    def F(self):
        return len(self.files)

    @cached_property
    def r_min(self):
        return np.array([f.r_min for f in self.files])

    @cached_property
    def r_max(self):
        return np.array([f.r_max for f in self.files])

    @cached_property
    def coeffs(self):
        """MOS coefficients as an ``(F, 4)`` array, highest power first."""
        return np.array([[f.c1, f.c2, f.c3, f.c4] for f in self.files])

    @cached_property
    def v(self):
        return np.array([f.v for f in self.files])

    @cached_property
    def popularity(self):
        return np.array([f.popularity for f in self.files])

    @cached_property
    def requests(self):
        return np.array([f.requests for f in self.files])

    @cached_property
    def capacity(self):
        return np.array(self.capacities, dtype=float)

    @property
    def shape(self):
        """Shape ``(K, n, F)`` of a placement tensor."""
        return (self.K, self.n, self.F)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        """Canonical JSON text; identical scenarios give identical bytes."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class Placement:
    """Boolean cache tensor ``m[k, i, j]``: packet ``i`` of file ``j`` on server ``k``."""

    m: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.m)
        if m.ndim != 3:
            raise InvalidArgumentError(f"expected a 3-d array, got ndim={m.ndim}", "placement")
        object.__setattr__(self, "m", m.astype(bool))

    def __array__(self, dtype=None, copy=None):
        return self.m.astype(dtype if dtype is not None else float)

    def counts(self):
        """Per-server, per-file cached packet counts, shape ``(K, F)``."""
        return self.m.sum(axis=1)

    def totals(self):
        """Cached packets per file summed over servers, shape ``(F,)``."""
        return self.m.sum(axis=(0, 1))


@dataclass(frozen=True)
class EncodingPlan:
    """Packet sizes ``s[i, j]`` in Mb."""

    s: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        if s.ndim != 2 or np.any(s < 0):
            raise InvalidArgumentError("expected a 2-d array of sizes >= 0", "plan")
        object.__setattr__(self, "s", s)

    def __array__(self, dtype=None, copy=None):
        return self.s if dtype is None else self.s.astype(dtype)

    def rates(self, T_d):
        """Encoding rate of each file in Mbps."""
        return self.s.sum(axis=0) / T_d

    @classmethod
    def equal_split(cls, rates, n, T_d):
        rates = np.asarray(rates, dtype=float)
        return cls(np.tile(rates * T_d / n, (n, 1)))


def zipf_popularity(F, theta):
    """Zipf request probabilities ``p_j ~ j**-theta`` over ranks ``1..F``."""
    F = check_positive_int(F, "F")
    if not (isinstance(theta, (int, float)) and 0 < theta < 1):
        raise InvalidArgumentError(f"must lie in (0, 1), got {theta!r}", "theta")
    weights = np.arange(1, F + 1, dtype=float) ** -float(theta)
    return weights / weights.sum()


def requests_per_file(scenario):
    """Expected request count of every file: total requests times popularity."""
    return scenario.total_requests * scenario.popularity


def _default_class_map(F, n_classes):
    if n_classes == 1:
        return [0] * F
    if n_classes != 3 or F % 4:
        raise InvalidArgumentError(
            "class counts are required unless there are 3 classes and F is divisible by 4",
            "classes",
        )
    half, quarter = F // 2, F // 4
    return [0] * half + [1] * quarter + [2] * (F - half - quarter)


def _class_map(cfg, F):
    classes = cfg["classes"]
    if "class_map" in cfg:
        cmap = list(cfg["class_map"])
        if len(cmap) != F:
            raise InvalidArgumentError(f"expected {F} entries, got {len(cmap)}", "class_map")
        for c in cmap:
            if not (isinstance(c, int) and 0 <= c < len(classes)):
                raise InvalidArgumentError(f"unknown class index {c!r}", "class_map")
        return cmap
    counts = [c.get("count") for c in classes]
    if all(c is None for c in counts):
        return _default_class_map(F, len(classes))
    if any(c is None for c in counts):
        raise InvalidArgumentError("either every class has a count or none does", "classes.count")
    for c in counts:
        check_positive_int(c, "classes.count", minimum=0)
    if sum(counts) != F:
        raise InvalidArgumentError(f"class counts sum to {sum(counts)}, expected F={F}", "classes.count")
    cmap = []
    for idx, c in enumerate(counts):
        cmap.extend([idx] * c)
    return cmap


_REQUIRED = ("F", "n", "K", "capacities_mb", "T_d_s", "theta", "classes")
_CLASS_KEYS = ("r_min", "r_max", "c1", "c2", "c3", "c4", "v")


def build_scenario(config):
    """Validate a config mapping and build an immutable :class:`Scenario`."""
    if not isinstance(config, dict):
        raise InvalidArgumentError("config must be a mapping", "config")
    for key in _REQUIRED:
        if key not in config:
            raise InvalidArgumentError("missing required key", key)
    F = check_positive_int(config["F"], "F")
    n = check_positive_int(config["n"], "n")
    K = check_positive_int(config["K"], "K")
    T_d = check_positive(config["T_d_s"], "T_d_s")
    R_bk = check_positive(config.get("R_bk_mbps", 10000.0 / F), "R_bk_mbps")
    total = check_positive(config.get("total_requests", DEFAULT_TOTAL_REQUESTS), "total_requests")
    theta = config["theta"]
    if not (isinstance(theta, (int, float)) and 0 < theta < 1):
        raise InvalidArgumentError(f"must lie in (0, 1), got {theta!r}", "theta")

    caps = config["capacities_mb"]
    if isinstance(caps, (int, float)) and not isinstance(caps, bool):
        caps = [caps] * K
    if not isinstance(caps, (list, tuple)) or len(caps) != K:
        raise InvalidArgumentError(f"expected {K} capacities", "capacities_mb")
    caps = tuple(check_positive(float(c) if isinstance(c, int) else c, "capacities_mb", allow_zero=True)
                 for c in caps)

    classes = config["classes"]
    if not isinstance(classes, (list, tuple)) or not classes:
        raise InvalidArgumentError("expected a non-empty list", "classes")
    for idx, cls in enumerate(classes):
        if not isinstance(cls, dict):
            raise InvalidArgumentError("expected a mapping", f"classes[{idx}]")
        for key in _CLASS_KEYS:
            if key not in cls:
                raise InvalidArgumentError("missing required key", f"classes[{idx}].{key}")
            val = cls[key]
            if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
                raise InvalidArgumentError(f"expected a real number, got {val!r}", f"classes[{idx}].{key}")
        if not 0 < cls["r_min"] <= cls["r_max"]:
            raise InvalidArgumentError(
                f"need 0 < r_min <= r_max, got {cls['r_min']} and {cls['r_max']}",
                f"classes[{idx}].r_min",
            )
    cmap = _class_map(config, F)

    popularity = zipf_popularity(F, float(theta))
    files = []
    for j in range(F):
        cls = classes[cmap[j]]
        files.append(VideoFile(
            index=j + 1,
            r_min=float(cls["r_min"]), r_max=float(cls["r_max"]),
            c1=float(cls["c1"]), c2=float(cls["c2"]), c3=float(cls["c3"]), c4=float(cls["c4"]),
            v=float(cls["v"]),
            popularity=float(popularity[j]),
            requests=float(total * popularity[j]),
            video_class=cmap[j],
        ))
    return Scenario(
        files=tuple(files), n=n, K=K, capacities=caps, T_d=T_d, R_bk=R_bk,
        total_requests=total, theta=float(theta),
    )


def load_config(path):
    """Read a YAML (or JSON) scenario config from ``path``."""
    text = Path(path).read_text()
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InvalidArgumentError(f"cannot parse {path}: {exc}", "config") from None
    if not isinstance(cfg, dict):
        raise InvalidArgumentError(f"{path} must hold a mapping", "config")
    return cfg


def with_overrides(config, **overrides):
    """Deep-copied config with top-level keys replaced."""
    cfg = copy.deepcopy(config)
    cfg.update(overrides)
    return cfg
