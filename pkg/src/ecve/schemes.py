"""Scheme registry and the flat option set used by the harness and CLI."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .baselines import solve_ec_only, solve_ecst, solve_ve_only
from .bnb import BnbOptions, solve_ec_ve
from .greedy import GreedyOptions, solve_greedy_ec_ve
from .relaxed import RelaxedOptions
from .validation import InvalidArgumentError

SCHEMES = ("ec-ve", "greedy-ec-ve", "ecst", "ec", "ve")


@dataclass(frozen=True)
class SchemeOptions:
    """Every tunable of every scheme in one flat record.

    ``seed_initial`` lets EC-VE start from the greedy, VE-only and ECST
    results (and keep the best of them as an incumbent).
    """

    n_starts: int = 16
    seed: int = 0
    tol_constraint: float = 1e-6
    tol_grad: float = 1e-6
    max_inner_iters: int = 10_000
    smoothing_eps: float = 1e-9
    max_outer_iters: int = 30
    initial_penalty: float = 1e3
    frac_tol: float = 1e-6
    branch_starts: int | None = None
    step: float | None = None
    ecst_rate: str = "r_min"
    seed_initial: bool = True

    def __post_init__(self):
        self.relaxed()
        self.greedy()

    def relaxed(self):
        return RelaxedOptions(
            n_starts=self.n_starts, seed=self.seed, tol_constraint=self.tol_constraint,
            tol_grad=self.tol_grad, max_inner_iters=self.max_inner_iters,
            smoothing_eps=self.smoothing_eps, max_outer_iters=self.max_outer_iters,
            initial_penalty=self.initial_penalty,
        )

    def bnb(self):
        return BnbOptions(relaxed=self.relaxed(), frac_tol=self.frac_tol,
                          branch_starts=self.branch_starts)

    def greedy(self):
        return GreedyOptions(bnb=self.bnb(), step=self.step)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_mapping(cls, mapping=None, **overrides):
        data = dict(mapping or {})
        data.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InvalidArgumentError(f"unknown option(s) {unknown}", "options")
        return cls(**data)


def check_scheme(name):
    if name not in SCHEMES:
        raise InvalidArgumentError(f"unknown scheme {name!r}; choose from {list(SCHEMES)}", "scheme")
    return name


def solve(scenario, scheme, options=None):
    """Run one scheme on one scenario and return its :class:`SolveResult`."""
    check_scheme(scheme)
    options = SchemeOptions() if options is None else options
    if scheme == "greedy-ec-ve":
        return solve_greedy_ec_ve(scenario, options.greedy())
    if scheme == "ecst":
        return solve_ecst(scenario, options.ecst_rate)
    if scheme == "ec":
        return solve_ec_only(scenario, options.bnb())
    if scheme == "ve":
        return solve_ve_only(scenario)
    initial = ()
    if options.seed_initial:
        initial = (
            solve_greedy_ec_ve(scenario, options.greedy()),
            solve_ve_only(scenario),
            solve_ecst(scenario, "r_min"),
        )
    return solve_ec_ve(scenario, options.bnb(), initial=initial)
