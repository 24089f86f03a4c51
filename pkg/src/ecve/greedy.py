"""Greedy joint caching and encoding.

The placement is solved once with every file at ``r_min`` (equal packet
sizes, sizes frozen), then rates are raised one step at a time: in each pass
every file's next step is scored and the single best strictly improving
step that keeps every server within capacity is adopted.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from ._fill import equal_count_fill, fill_remaining, packet_sizes, secure_fill
from .bnb import BnbOptions, solve_pinned
from .qoe import min_secure_packets
from .results import better, evaluate, infeasible
from .validation import InvalidArgumentError, check_positive, check_scenario


@dataclass(frozen=True)
class GreedyOptions:
    """``step`` is the rate increment in Mbps; ``None`` means ``1 / (T_d * n)``."""

    bnb: BnbOptions = field(default_factory=BnbOptions)
    step: float | None = None

    def __post_init__(self):
        if not isinstance(self.bnb, BnbOptions):
            raise InvalidArgumentError("expected BnbOptions", "bnb")
        if self.step is not None:
            check_positive(self.step, "step")


def default_step(scenario):
    return 1.0 / (scenario.T_d * scenario.n)


def _check_rates(scenario, rates):
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (scenario.F,):
        raise InvalidArgumentError(f"expected {scenario.F} rates, got shape {rates.shape}", "rates")
    if np.any(rates < scenario.r_min - 1e-12) or np.any(rates > scenario.r_max + 1e-12):
        raise InvalidArgumentError("rates must lie in [r_min, r_max]", "rates")
    return rates


def solve_caching_fixed_rates(scenario, rates, options=None, *, scheme="ec"):
    """Integral placement minimising the latency term at fixed equal packet sizes.

    Runs the pinning loop with sizes frozen.  The secrecy-minimum fill and
    the equal-count fill (each topped up with whatever else fits) seed the
    relaxation and act as incumbents.
    """
    check_scenario(scenario)
    options = BnbOptions() if options is None else options
    rates = _check_rates(scenario, rates)
    size = packet_sizes(scenario, rates)
    need = np.array([min_secure_packets(scenario.n, q) for q in scenario.requests])
    if float(np.sum(need * size)) > float(scenario.capacity.sum()) + 1e-6:
        return infeasible(scheme, "secrecy minimum exceeds total capacity",
                          {"relaxed_solves": 0})
    s = np.tile(size, (scenario.n, 1))

    seeds = []
    for base in (secure_fill(scenario, rates), equal_count_fill(scenario, rates)):
        if base is not None:
            seeds.append(fill_remaining(scenario, rates, base))
    result, _, _ = solve_pinned(scenario, options, fixed_sizes=s, scheme=scheme,
                                warm_starts=[(m.astype(float), s) for m in seeds])
    best = result
    for m in seeds:
        best = better(best, evaluate(scenario, scheme, m, s))
    if best is not result and best.feasible:
        best = evaluate(scenario, scheme, np.asarray(best.placement), s, result.counters,
                        {"source": "heuristic fill"})
    return best


def solve_greedy_ec_ve(scenario, options=None):
    """Fixed-rate caching at ``r_min`` followed by greedy single-file rate steps."""
    check_scenario(scenario)
    options = GreedyOptions() if options is None else options
    step = default_step(scenario) if options.step is None else float(options.step)
    base = solve_caching_fixed_rates(scenario, scenario.r_min, options.bnb, scheme="greedy-ec-ve")
    counters = dict(base.counters)
    counters["dimension"] = scenario.K * scenario.n * scenario.F
    if not base.feasible:
        return infeasible("greedy-ec-ve", base.metadata.get("reason", "caching infeasible"), counters)

    m = np.asarray(base.placement, dtype=bool)
    counts = m.sum(axis=1).astype(float)
    deficit = np.maximum(scenario.n - m.sum(axis=(0, 1)), 0).astype(float)
    span = np.floor((scenario.r_max - scenario.r_min) / step + 1e-9).astype(np.int64)
    max_outer = int(span.sum()) + 1
    t, passes, adopted = _k.greedy_rates(
        np.zeros(scenario.F, dtype=np.int64), step, scenario.r_min, scenario.r_max,
        scenario.coeffs, scenario.v, scenario.popularity / scenario.R_bk, counts, deficit,
        scenario.n, scenario.T_d, scenario.capacity, max_outer)
    rates = np.minimum(scenario.r_min + t * step, scenario.r_max)
    s = np.tile(packet_sizes(scenario, rates), (scenario.n, 1))
    counters.update(greedy_steps=int(adopted), outer_passes=int(passes),
                    evaluations=int(passes) * scenario.F)
    meta = {"step": step, "coarse_step": step != default_step(scenario)}
    return evaluate(scenario, "greedy-ec-ve", m, s, counters, meta)
