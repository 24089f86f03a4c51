"""Solver output shared by every scheme."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .catalog import EncodingPlan, Placement
from .qoe import check_feasibility, objective, transfer_latency

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class SolveResult:
    """Placement, plan, objective and feasibility report of one solve.

    ``Q`` is the joint QoE (maximisation sense) and ``Q_min = -Q`` the
    value of the minimisation form.  Infeasible results carry no placement,
    plan or objective.
    """

    scheme: str
    status: str
    placement: Placement | None = field(default=None, repr=False)
    plan: EncodingPlan | None = field(default=None, repr=False)
    Q: float = float("nan")
    per_file: tuple = field(default=(), repr=False)
    report: object = field(default=None, repr=False)
    latency_s: float = float("nan")
    counters: dict = field(default_factory=dict, repr=False)
    metadata: dict = field(default_factory=dict, repr=False)

    @property
    def feasible(self):
        return self.status == FEASIBLE

    @property
    def Q_min(self):
        return -self.Q

    @property
    def mean_mos(self):
        return self.Q / len(self.per_file) if self.per_file else float("nan")

    def rates(self, T_d):
        return None if self.plan is None else self.plan.rates(T_d)


def evaluate(scenario, scheme, m, s, counters=None, metadata=None):
    """Build a :class:`SolveResult` for an integral placement, checking every constraint."""
    m = np.rint(np.asarray(m, dtype=float)).astype(bool)
    s = np.asarray(s, dtype=float)
    report = check_feasibility(scenario, m, s)
    counters = dict(counters or {})
    metadata = dict(metadata or {})
    if not report.feasible:
        metadata.setdefault("reason", report.summary())
        return SolveResult(scheme, INFEASIBLE, report=report, counters=counters, metadata=metadata)
    obj = objective(scenario, m, s)
    return SolveResult(
        scheme=scheme,
        status=FEASIBLE,
        placement=Placement(m),
        plan=EncodingPlan(s),
        Q=obj.total,
        per_file=obj.per_file,
        report=report,
        latency_s=transfer_latency(scenario, m, s),
        counters=counters,
        metadata=metadata,
    )


def infeasible(scheme, reason, counters=None, metadata=None):
    metadata = dict(metadata or {})
    metadata["reason"] = reason
    return SolveResult(scheme, INFEASIBLE, counters=dict(counters or {}), metadata=metadata)


def better(a, b):
    """The better of two results: feasible beats infeasible, then larger ``Q``; ``a`` wins ties."""
    if b is None or not b.feasible:
        return a
    if a is None or not a.feasible:
        return b
    return b if b.Q > a.Q else a
