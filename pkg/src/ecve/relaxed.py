"""Continuous relaxation of the joint caching/encoding problem.

The relaxed problem minimises ``sum_j g_j - f_j`` over cache fractions
``m[k, i, j] in [0, 1]`` and packet sizes ``s[i, j] >= 0`` subject to the
per-server capacity (bilinear in ``m`` and ``s``), the per-file packet count
bounds and the per-file rate range.  Individual cache entries may be pinned
to 0 or 1.

Method: an augmented-Lagrangian outer loop handles the capacity rows; the
inner problem is solved with a non-monotone spectral projected gradient
(SPG) over the remaining constraints, which are all of the
"box plus bounded sum" form and project exactly.  The ``x**(2/3)`` latency
term is smoothed as ``(x + eps)**(2/3) - eps**(2/3)``, which keeps it
concave with a steep but finite slope at zero: a fully cached file then
resists losing a packet, as the unsmoothed cusp does.  Globality is
approached by multi-start.  The inner loops are compiled with numba.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as _k
from .qoe import penalty_array, quality_array, secure_lower_bound
from .validation import InvalidArgumentError, check_positive, check_positive_int, check_scenario

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
MAX_ITERS = "max-iters"

_MAX_PENALTY = 1e12
_STALL = 200  # SPG iterations without relative progress before giving up


@dataclass(frozen=True)
class PinSet:
    """Cache entries fixed to exactly 0 or 1, as ``(k, i, j, value)`` tuples (0-based)."""

    entries: tuple = ()

    def __post_init__(self):
        entries = tuple((int(k), int(i), int(j), int(v)) for k, i, j, v in self.entries)
        seen = set()
        for k, i, j, v in entries:
            if v not in (0, 1):
                raise InvalidArgumentError(f"pin value must be 0 or 1, got {v}", "pins")
            if (k, i, j) in seen:
                raise InvalidArgumentError(f"duplicate pin at {(k, i, j)}", "pins")
            seen.add((k, i, j))
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return any(e[:3] == tuple(key) for e in self.entries)

    def add(self, k, i, j, value):
        return PinSet(self.entries + ((k, i, j, value),))

    def masks(self, shape):
        """Boolean mask of pinned entries and the pinned values, both of ``shape``."""
        mask = np.zeros(shape, dtype=bool)
        values = np.zeros(shape)
        for k, i, j, v in self.entries:
            if not (0 <= k < shape[0] and 0 <= i < shape[1] and 0 <= j < shape[2]):
                raise InvalidArgumentError(f"pin {(k, i, j)} outside placement shape {shape}", "pins")
            mask[k, i, j] = True
            values[k, i, j] = v
        return mask, values

    @classmethod
    def from_array(cls, m):
        """Pin every entry of an integral placement."""
        m = np.rint(np.asarray(m)).astype(int)
        return cls(tuple((k, i, j, m[k, i, j]) for k, i, j in np.ndindex(m.shape)))


@dataclass(frozen=True)
class RelaxedOptions:
    n_starts: int = 16
    seed: int = 0
    tol_constraint: float = 1e-6
    tol_grad: float = 1e-6
    max_inner_iters: int = 10_000
    smoothing_eps: float = 1e-9
    max_outer_iters: int = 30
    initial_penalty: float = 1e3

    def __post_init__(self):
        check_positive_int(self.n_starts, "n_starts")
        check_positive_int(self.max_inner_iters, "max_inner_iters")
        check_positive_int(self.max_outer_iters, "max_outer_iters")
        check_positive(self.tol_constraint, "tol_constraint")
        check_positive(self.tol_grad, "tol_grad")
        check_positive(self.smoothing_eps, "smoothing_eps")
        check_positive(self.initial_penalty, "initial_penalty")


@dataclass(frozen=True)
class RelaxedSolution:
    m: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)
    value: float
    status: str
    best_start: int
    residual: float
    iterations: int
    evaluations: int
    feasible_starts: int
    converged: bool
    dimension: int
    pins: PinSet = field(default_factory=PinSet, repr=False)

    @property
    def feasible(self):
        return self.status == FEASIBLE


def fractional_entries(sol, tol=1e-6):
    """Cache entries farther than ``tol`` from both 0 and 1, ordered by ``(j, i, k)``."""
    m = np.asarray(sol.m if isinstance(sol, RelaxedSolution) else sol)
    dist = np.minimum(np.abs(m), np.abs(m - 1.0))
    k, i, j = np.nonzero(dist > tol)
    order = np.lexsort((k, i, j))
    return [(int(k[o]), int(i[o]), int(j[o])) for o in order]


class _Relaxation:
    """Relaxed problem for one scenario and pin set, in scaled variables.

    Packet sizes are optimised as ``x = s / unit`` where ``unit_j`` is the
    equal-split packet size at the file's top rate, so every ``x`` lies in
    ``[0, n]``.  With ``fixed_sizes`` the sizes are frozen and only the cache
    fractions move; the objective is then the latency term alone.
    """

    def __init__(self, scenario, pins, options, fixed_sizes=None):
        self.sc = scenario
        self.opt = options
        K, n, F = scenario.shape
        self.K, self.n, self.F = K, n, F
        self.nm = K * n * F
        self.unit = scenario.T_d * scenario.r_max / n
        self.fixed = None if fixed_sizes is None else np.asarray(fixed_sizes, dtype=float)
        self.nx = 0 if self.fixed is not None else n * F
        self.dim = self.nm + self.nx

        pin_mask, pin_vals = pins.masks(scenario.shape)
        lower = np.where(pin_mask, pin_vals, 0.0)
        upper = np.where(pin_mask, pin_vals, 1.0)
        # file-major rows: (F, K*n)
        self.m_lower = lower.transpose(2, 0, 1).reshape(F, K * n)
        self.m_upper = upper.transpose(2, 0, 1).reshape(F, K * n)
        need = secure_lower_bound(n, scenario.requests)
        self.count_lo = np.maximum(need, self.m_lower.sum(axis=1))
        self.count_hi = np.full(F, float(n))
        self.pin_mask = pin_mask
        self.pin_vals = pin_vals

        self.x_lower = np.zeros((F, n))
        self.x_upper = np.full((F, n), float(n))
        self.x_lo = n * scenario.r_min / scenario.r_max
        self.x_hi = np.full(F, float(n))

        self._build_groups()
        self._no_sizes = np.zeros((n, F))
        self.w = scenario.popularity / scenario.R_bk
        self.cap = scenario.capacity
        self.cap_scale = max(float(np.sum(scenario.T_d * scenario.r_max)), 1e-12)
        self.eps = options.smoothing_eps
        self.eps23 = self.eps ** (2.0 / 3.0)
        self.evaluations = 0

    # -- structure --------------------------------------------------------
    def _build_groups(self):
        """Flat index tables for the compiled projection (one group per file and block)."""
        K, n, F = self.K, self.n, self.F
        G = F if self.fixed is not None else 2 * F
        width = K * n
        self.gidx = np.zeros((G, width), dtype=np.int64)
        self.glen = np.zeros(G, dtype=np.int64)
        self.glower = np.zeros((G, width))
        self.gupper = np.zeros((G, width))
        self.glo = np.zeros(G)
        self.ghi = np.zeros(G)
        kk, ii = np.meshgrid(np.arange(K), np.arange(n), indexing="ij")
        for j in range(F):
            self.gidx[j] = (kk * n * F + ii * F + j).ravel()
            self.glen[j] = width
            self.glower[j] = self.m_lower[j]
            self.gupper[j] = self.m_upper[j]
            self.glo[j] = self.count_lo[j]
            self.ghi[j] = self.count_hi[j]
        if self.fixed is None:
            for j in range(F):
                g = F + j
                self.gidx[g, :n] = self.nm + np.arange(n) * F + j
                self.glen[g] = n
                self.gupper[g, :n] = float(n)
                self.glo[g] = self.x_lo[j]
                self.ghi[g] = self.x_hi[j]

    def linear_feasible(self, tol=1e-9):
        """Can the count bounds be met at all under the pins?"""
        ok_hi = self.m_lower.sum(axis=1) <= self.count_hi + tol
        ok_lo = self.m_upper.sum(axis=1) >= self.count_lo - tol
        return bool(np.all(ok_hi & ok_lo))

    def split(self, z):
        m = z[: self.nm].reshape(self.K, self.n, self.F)
        if self.fixed is not None:
            return m, self.fixed
        x = z[self.nm:].reshape(self.n, self.F)
        return m, x * self.unit

    def pack(self, m, s):
        parts = [np.asarray(m, dtype=float).ravel()]
        if self.fixed is None:
            parts.append((np.asarray(s, dtype=float) / self.unit).ravel())
        return np.concatenate(parts)

    def project(self, z):
        out = np.empty_like(z)
        _k.project(z, self.gidx, self.glen, self.glower, self.gupper, self.glo, self.ghi, out)
        return out

    # -- objective and constraints ----------------------------------------
    def _sizes(self):
        return self.fixed if self.fixed is not None else self._no_sizes

    def constraints(self, z):
        return _k.capacity_rows(z, self.K, self.n, self.F, self.unit, self.fixed is not None,
                                self._sizes(), self.cap, self.cap_scale)

    def residual(self, z):
        """Largest capacity overrun in Mb."""
        c = self.constraints(z)
        return float(max(0.0, c.max())) * self.cap_scale if c.size else 0.0

    def true_value(self, z):
        m, s = self.split(z)
        g = penalty_array(self.sc, m, s).sum()
        if self.fixed is not None:
            return float(g)
        f = quality_array(self.sc, s.sum(axis=0) / self.sc.T_d).sum()
        return float(g - f)

    def fun_grad(self, z, lam, rho, mode=0):
        grad = np.empty_like(z)
        value = _k.fun_grad(z, self.K, self.n, self.F, self.unit, self.fixed is not None,
                            self._sizes(), self.w, self.sc.v, self.sc.coeffs, self.sc.T_d,
                            self.cap, self.cap_scale, self.eps, np.asarray(lam, dtype=float),
                            float(rho), mode, grad)
        return value, grad

    def spg(self, z, lam, rho, *, tol, max_iter, mode=0):
        """Run the compiled SPG in place; returns ``(iterations, pg_norm)``."""
        it, ev, pg = _k.spg(z, self.K, self.n, self.F, self.unit, self.fixed is not None,
                            self._sizes(), self.w, self.sc.v, self.sc.coeffs, self.sc.T_d,
                            self.cap, self.cap_scale, self.eps, np.asarray(lam, dtype=float),
                            float(rho), mode, self.gidx, self.glen, self.glower, self.gupper,
                            self.glo, self.ghi, float(tol), int(max_iter), 10, _STALL)
        self.evaluations += ev
        return it, pg

    # -- starting points --------------------------------------------------
    def secure_fill_start(self):
        """Cache the fewest secure packets per file, largest-room server first, at ``r_min``."""
        sc = self.sc
        K, n, F = self.K, self.n, self.F
        size = sc.r_min * sc.T_d / n
        room = sc.capacity.copy()
        m = np.where(self.pin_mask, self.pin_vals, 0.0)
        need = np.ceil(np.round(self.count_lo, 9)).astype(int)
        for j in range(F):
            have = int(round(m[:, :, j].sum()))
            for i in range(n):
                if have >= need[j]:
                    break
                if m[:, i, j].sum() > 0 or np.all(self.pin_mask[:, i, j]):
                    continue
                free = [k for k in range(K) if not self.pin_mask[k, i, j]]
                k = max(free, key=lambda kk: (room[kk], -kk))
                m[k, i, j] = 1.0
                room[k] -= size[j]
                have += 1
        s = np.tile(size, (n, 1))
        return self.pack(m, s if self.fixed is None else self.fixed)

    def random_start(self, rng):
        sc = self.sc
        m = rng.uniform(0.0, 1.0, size=(self.K, self.n, self.F))
        rates = rng.uniform(sc.r_min, sc.r_max)
        s = np.tile(rates * sc.T_d / self.n, (self.n, 1))
        return self.pack(m, s if self.fixed is None else self.fixed)

    # -- cleanup ----------------------------------------------------------
    def purify(self, z, tol=1e-9):
        """Round cache entries of empty packets without changing value or load.

        A packet of (numerically) zero size contributes nothing to the
        objective or the capacity rows, so its cache fraction only matters
        for the per-file count bounds.  Such free entries are rounded while
        the counts stay within bounds.
        """
        if self.fixed is not None:
            return z
        m, s = self.split(z)
        m = m.copy()
        empty = (s <= tol * self.unit)[None, :, :] & ~self.pin_mask
        for j in range(self.F):
            free = empty[:, :, j]
            if not free.any():
                continue
            vals = m[:, :, j][free]
            if np.all((vals == 0) | (vals == 1)):
                continue
            fixed_part = m[:, :, j][~free].sum()
            mass = vals.sum()
            for count in (int(np.ceil(mass - 1e-12)), int(np.floor(mass + 1e-12))):
                total = fixed_part + count
                if self.count_lo[j] - 1e-9 <= total <= self.count_hi[j] + 1e-9 and count <= vals.size:
                    new = np.zeros(vals.size)
                    new[np.argsort(-vals, kind="stable")[:count]] = 1.0
                    block = m[:, :, j]
                    block[free] = new
                    m[:, :, j] = block
                    break
        return self.pack(m, s)


def _local_solve(prob, z0, options):
    """Augmented-Lagrangian local solve from one start; returns ``(z, residual, iters, converged)``."""
    budget = options.max_inner_iters
    tol_c = options.tol_constraint
    tol_g = options.tol_grad
    lam = np.zeros(prob.K)
    rho = options.initial_penalty
    z = prob.project(np.asarray(z0, dtype=float))
    used = 0
    prev = np.inf
    converged = False
    for outer in range(options.max_outer_iters):
        # loose inner tolerance early, tightening towards tol_g
        inner_tol = max(tol_g, 1e-2 * 0.1 ** outer)
        it, pg = prob.spg(z, lam, rho, tol=inner_tol, max_iter=max(budget - used, 1))
        used += it
        cons = prob.constraints(z)
        viol = float(max(0.0, cons.max())) * prob.cap_scale
        lam = np.maximum(0.0, lam + rho * cons)
        if viol <= tol_c and pg <= tol_g:
            converged = True
            break
        if used >= budget:
            break
        if viol > 0.25 * prev:
            if rho >= _MAX_PENALTY and viol > 0.99 * prev:
                break  # penalty saturated and no progress
            rho = min(rho * 10.0, _MAX_PENALTY)
        prev = viol

    if prob.residual(z) > tol_c:
        # feasibility restoration on the capacity rows alone
        it, _ = prob.spg(z, lam, rho, tol=1e-3 * tol_c / prob.cap_scale, max_iter=budget, mode=1)
        used += it
        if prob.residual(z) <= tol_c:
            z2 = z.copy()
            it, pg = prob.spg(z2, lam, max(rho, 1e6), tol=tol_g, max_iter=budget)
            used += it
            if prob.residual(z2) <= tol_c:
                z = z2
                converged = pg <= tol_g
    return z, prob.residual(z), used, converged


def solve_relaxed(scenario, pins=None, options=None, *, fixed_sizes=None, warm_starts=()):
    """Multi-start solve of the relaxed problem under ``pins``.

    ``warm_starts`` is a sequence of ``(m, s)`` pairs tried before the
    built-in starts (the security-minimum fill, then uniform random starts).
    The best feasible local optimum wins; ties go to the lowest start index.
    """
    check_scenario(scenario)
    pins = PinSet() if pins is None else pins
    options = RelaxedOptions() if options is None else options
    if not isinstance(options, RelaxedOptions):
        raise InvalidArgumentError("expected RelaxedOptions", "options")
    if fixed_sizes is not None and np.shape(fixed_sizes) != (scenario.n, scenario.F):
        raise InvalidArgumentError(f"expected shape {(scenario.n, scenario.F)}", "fixed_sizes")
    prob = _Relaxation(scenario, pins, options, fixed_sizes=fixed_sizes)

    empty_m = np.where(prob.pin_mask, prob.pin_vals, 0.0)
    empty_s = prob.fixed if prob.fixed is not None else np.zeros((scenario.n, scenario.F))
    if not prob.linear_feasible():
        return RelaxedSolution(empty_m, empty_s, np.inf, INFEASIBLE, -1, np.inf, 0, 0, 0,
                               False, prob.dim, pins)

    rng = np.random.default_rng(options.seed)
    starts = [prob.pack(m0, s0 if prob.fixed is None else prob.fixed) for m0, s0 in warm_starts]
    n_warm = len(starts)
    starts.append(prob.secure_fill_start())
    starts.extend(prob.random_start(rng) for _ in range(options.n_starts - 1))

    best = None
    total_iters = 0
    n_feasible = 0
    fallback = None
    for idx, z0 in enumerate(starts):
        z, res, iters, conv = _local_solve(prob, z0, options)
        total_iters += iters
        if idx < n_warm:
            # a feasible warm start is kept if its local solve ends worse
            z0p = prob.project(z0)
            if (np.max(np.abs(z0p - z0)) <= 1e-12 and prob.residual(z0p) <= options.tol_constraint
                    and (res > options.tol_constraint or prob.true_value(z0p) < prob.true_value(z))):
                z, res, conv = z0p, prob.residual(z0p), True
        if np.max(np.abs(prob.project(z) - z)) > 1e-9:
            res = max(res, np.inf)  # left the linear constraints: discard
        if res > options.tol_constraint:
            if fallback is None or res < fallback[1]:
                fallback = (z, res, idx)
            continue
        z = prob.purify(z)
        n_feasible += 1
        value = prob.true_value(z)
        if best is None or value < best[0] - 1e-12:
            best = (value, z, idx, prob.residual(z), conv)

    if best is None:
        z, res, idx = fallback
        m, s = prob.split(z)
        status = MAX_ITERS if total_iters >= len(starts) * options.max_inner_iters else INFEASIBLE
        return RelaxedSolution(m.copy(), np.array(s, copy=True), np.inf, status, idx, res,
                               total_iters, prob.evaluations, 0, False, prob.dim, pins)

    value, z, idx, res, conv = best
    m, s = prob.split(z)
    m = m.copy()
    m[prob.pin_mask] = prob.pin_vals[prob.pin_mask]
    return RelaxedSolution(m, np.array(s, copy=True), value, FEASIBLE, idx, res, total_iters,
                           prob.evaluations, n_feasible, conv, prob.dim, pins)


def with_options(options, **changes):
    return replace(options, **changes)
