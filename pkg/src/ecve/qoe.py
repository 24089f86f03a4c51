"""Encoding quality, latency penalty, backhaul packet counts and constraint checks.

Placements are ``(K, n, F)`` arrays (boolean or relaxed reals in ``[0, 1]``)
and plans are ``(n, F)`` arrays of packet sizes in Mb.  Everything here is a
pure function of its inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .validation import InvalidArgumentError, check_placement, check_plan


def encoding_quality(file, total_size, T_d):
    """MOS of ``file`` encoded into ``total_size`` Mb over ``T_d`` seconds.

    The cubic is evaluated at any rate; range checks live in
    :func:`check_feasibility`.
    """
    return file.quality(total_size / T_d)


def quality_array(scenario, rates):
    """Vectorised MOS polynomial for every file at ``rates`` (Mbps)."""
    c = scenario.coeffs
    r = np.asarray(rates, dtype=float)
    return ((c[:, 0] * r + c[:, 1]) * r + c[:, 2]) * r + c[:, 3]


def uncached_volume(placement, plan):
    """Per-file volume (Mb) that must cross the backhaul, clamped at zero."""
    m = np.asarray(placement, dtype=float)
    s = np.asarray(plan, dtype=float)
    coverage = m.sum(axis=0)
    return np.maximum((s * (1.0 - coverage)).sum(axis=0), 0.0)


def latency_penalty(file, placement, plan, R_bk):
    """Latency term of the QoE for one file (MOS scale)."""
    j = file.index - 1
    volume = uncached_volume(placement, plan)[j]
    return file.v * (file.popularity * volume / R_bk) ** (2.0 / 3.0)


def penalty_array(scenario, placement, plan):
    volume = uncached_volume(placement, plan)
    return scenario.v * (scenario.popularity * volume / scenario.R_bk) ** (2.0 / 3.0)


def transfer_latency(scenario, placement, plan):
    """Popularity-weighted backhaul transfer time in seconds (summed over files)."""
    volume = uncached_volume(placement, plan)
    return float(np.sum(scenario.popularity * volume) / scenario.R_bk)


def backhaul_packets(scenario, placement, j):
    """Packets of file ``j`` (0-based) sent over the backhaul across all its requests."""
    m = np.asarray(placement, dtype=float)
    cached = m[:, :, j].sum()
    per_request = scenario.n - min(scenario.n, cached)
    return scenario.requests[j] * per_request


def secure_lower_bound(n, requests):
    """Right-hand side of the secrecy inequality on cached packet counts."""
    return n * (1.0 - 1.0 / requests) + 1.0 / requests


def min_secure_packets(n, requests):
    """Fewest cached packets that keep a file's backhaul exposure below ``n``."""
    if not requests > 0:
        raise InvalidArgumentError(f"must be > 0, got {requests!r}", "requests")
    bound = secure_lower_bound(n, requests)
    # guard against 5.000000000001 style round-off before the ceiling
    needed = math.ceil(round(bound, 9))
    return int(min(max(needed, 0), n))


@dataclass(frozen=True)
class FeasibilityReport:
    capacity_ok: tuple
    no_duplication_ok: bool
    security_ok: tuple
    rate_ok: tuple
    binary_ok: bool
    capacity_slack: tuple
    duplication_slack: tuple
    security_slack: tuple
    rate_slack: tuple

    @property
    def feasible(self):
        return (all(self.capacity_ok) and self.no_duplication_ok and all(self.security_ok)
                and all(self.rate_ok) and self.binary_ok)

    def relaxed_feasible(self):
        """Every constraint except integrality holds."""
        return (all(self.capacity_ok) and self.no_duplication_ok
                and all(self.security_ok) and all(self.rate_ok))

    def summary(self):
        failed = []
        if not all(self.capacity_ok):
            failed.append("capacity")
        if not self.no_duplication_ok:
            failed.append("duplication")
        if not all(self.security_ok):
            failed.append("security")
        if not all(self.rate_ok):
            failed.append("rate")
        if not self.binary_ok:
            failed.append("binary")
        return "feasible" if not failed else "violates " + ",".join(failed)


def check_feasibility(scenario, placement, plan, *, tol=1e-6, binary=True):
    """Evaluate every constraint of the joint problem independently.

    ``tol`` is an absolute slack in each constraint's own unit (Mb for
    capacity, packets for counts, Mbps for rates).  With ``binary=False``
    the integrality flag is replaced by a ``[0, 1]`` box check.
    """
    m = check_placement(scenario, placement)
    s = check_plan(scenario, plan)

    load = np.einsum("kij,ij->k", m, s)
    cap_slack = scenario.capacity - load
    totals = m.sum(axis=(0, 1))
    dup_slack = scenario.n - totals
    sec_slack = totals - secure_lower_bound(scenario.n, scenario.requests)
    rates = s.sum(axis=0) / scenario.T_d
    rate_slack = np.minimum(rates - scenario.r_min, scenario.r_max - rates)
    if binary:
        binary_ok = bool(np.all((m == 0) | (m == 1)))
    else:
        binary_ok = bool(np.all((m >= -tol) & (m <= 1 + tol)))

    return FeasibilityReport(
        capacity_ok=tuple(bool(x) for x in cap_slack >= -tol),
        no_duplication_ok=bool(np.all(dup_slack >= -tol)),
        security_ok=tuple(bool(x) for x in sec_slack >= -tol),
        rate_ok=tuple(bool(x) for x in rate_slack >= -tol),
        binary_ok=binary_ok,
        capacity_slack=tuple(cap_slack.tolist()),
        duplication_slack=tuple(dup_slack.tolist()),
        security_slack=tuple(sec_slack.tolist()),
        rate_slack=tuple(rate_slack.tolist()),
    )


@dataclass(frozen=True)
class ObjectiveBreakdown:
    quality: tuple
    penalty: tuple

    @property
    def per_file(self):
        return tuple(f - g for f, g in zip(self.quality, self.penalty))

    @property
    def total(self):
        return float(math.fsum(self.per_file))

    @property
    def mean_mos(self):
        return self.total / len(self.quality)


def objective(scenario, placement, plan):
    """Joint QoE: encoding quality minus latency penalty, per file and in total."""
    m = check_placement(scenario, placement)
    s = check_plan(scenario, plan)
    f = quality_array(scenario, s.sum(axis=0) / scenario.T_d)
    g = penalty_array(scenario, m, s)
    return ObjectiveBreakdown(quality=tuple(f.tolist()), penalty=tuple(g.tolist()))
