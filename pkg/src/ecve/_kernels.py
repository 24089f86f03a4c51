"""Compiled inner loops for the relaxed solver.

Variables live in one flat vector ``z``: the cache tensor ``m`` (``K*n*F``
entries, C order over ``(k, i, j)``) followed, unless sizes are frozen, by
the scaled sizes ``x`` (``n*F`` entries, C order over ``(i, j)``).  The
feasible set apart from capacity is a product of groups, each a box with a
bounded sum; ``gidx``/``glen`` list the flat indices of every group.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def project(z, gidx, glen, lower, upper, lo, hi, out):
    """Exact Euclidean projection onto the product of box-and-sum groups."""
    out[:] = z
    G = glen.shape[0]
    for g in range(G):
        L = glen[g]
        total = 0.0
        for t in range(L):
            v = z[gidx[g, t]]
            if v < lower[g, t]:
                v = lower[g, t]
            elif v > upper[g, t]:
                v = upper[g, t]
            out[gidx[g, t]] = v
            total += v
        if total > hi[g]:
            target = hi[g]
        elif total < lo[g]:
            target = lo[g]
        else:
            continue
        # sweep the breakpoints of the piecewise-linear row sum
        keys = np.empty(2 * L)
        delta = np.empty(2 * L)
        phi = 0.0
        for t in range(L):
            y = z[gidx[g, t]]
            keys[t] = y - upper[g, t]
            delta[t] = 1.0
            keys[L + t] = y - lower[g, t]
            delta[L + t] = -1.0
            phi += upper[g, t]
        order = np.argsort(keys)
        nfree = 0.0
        prev = keys[order[0]]
        tau = keys[order[2 * L - 1]]
        for q in range(2 * L):
            o = order[q]
            t_k = keys[o]
            new_phi = phi - nfree * (t_k - prev)
            if new_phi <= target and nfree > 0:
                tau = prev + (phi - target) / nfree
                break
            phi = new_phi
            prev = t_k
            nfree += delta[o]
            if nfree < 0.5 and phi <= target:
                tau = t_k
                break
        for t in range(L):
            v = z[gidx[g, t]] - tau
            if v < lower[g, t]:
                v = lower[g, t]
            elif v > upper[g, t]:
                v = upper[g, t]
            out[gidx[g, t]] = v


@njit(cache=True)
def fun_grad(z, K, n, F, unit, fixed, sizes, w, v, coeffs, T_d, cap, cap_scale,
             eps, lam, rho, mode, grad):
    """Augmented Lagrangian value and gradient.

    ``mode`` 0 evaluates objective plus capacity terms, mode 1 only half the
    squared capacity violation (feasibility restoration).
    """
    nm = K * n * F
    s = np.empty((n, F))
    for i in range(n):
        for j in range(F):
            if fixed:
                s[i, j] = sizes[i, j]
            else:
                s[i, j] = z[nm + i * F + j] * unit[j]
    cover = np.zeros((n, F))
    load = np.zeros(K)
    for k in range(K):
        for i in range(n):
            for j in range(F):
                mv = z[k * n * F + i * F + j]
                cover[i, j] += mv
                load[k] += mv * s[i, j]
    for t in range(grad.shape[0]):
        grad[t] = 0.0

    value = 0.0
    dg = np.zeros(F)
    dfdr = np.zeros(F)
    if mode == 0:
        eps23 = eps ** (2.0 / 3.0)
        for j in range(F):
            U = 0.0
            V = 0.0
            for i in range(n):
                U += s[i, j] * (1.0 - cover[i, j])
                V += s[i, j]
            a = w[j] * U
            if a < 0.0:
                a = 0.0
            t13 = np.cbrt(a + eps)
            value += v[j] * (t13 * t13 - eps23)
            if w[j] * U >= 0.0:
                dg[j] = v[j] * (2.0 / 3.0) / t13 * w[j]
            if not fixed:
                r = V / T_d
                value -= ((coeffs[j, 0] * r + coeffs[j, 1]) * r + coeffs[j, 2]) * r + coeffs[j, 3]
                dfdr[j] = (3.0 * coeffs[j, 0] * r + 2.0 * coeffs[j, 1]) * r + coeffs[j, 2]

    mult = np.zeros(K)
    for k in range(K):
        c = (load[k] - cap[k]) / cap_scale
        if mode == 0:
            mu = lam[k] + rho * c
            if mu < 0.0:
                mu = 0.0
            value += (mu * mu - lam[k] * lam[k]) / (2.0 * rho)
            mult[k] = mu / cap_scale
        else:
            if c > 0.0:
                value += 0.5 * c * c
                mult[k] = c / cap_scale

    for k in range(K):
        for i in range(n):
            for j in range(F):
                grad[k * n * F + i * F + j] = (mult[k] - dg[j]) * s[i, j]
    if not fixed:
        for i in range(n):
            for j in range(F):
                gs = dg[j] * (1.0 - cover[i, j]) - dfdr[j] / T_d
                for k in range(K):
                    gs += mult[k] * z[k * n * F + i * F + j]
                grad[nm + i * F + j] = gs * unit[j]
    return value


@njit(cache=True)
def max_violation(z, K, n, F, unit, fixed, sizes, cap, cap_scale):
    nm = K * n * F
    worst = 0.0
    for k in range(K):
        load = 0.0
        for i in range(n):
            for j in range(F):
                if fixed:
                    sij = sizes[i, j]
                else:
                    sij = z[nm + i * F + j] * unit[j]
                load += z[k * n * F + i * F + j] * sij
        c = (load - cap[k]) / cap_scale
        if c > worst:
            worst = c
    return worst


@njit(cache=True)
def capacity_rows(z, K, n, F, unit, fixed, sizes, cap, cap_scale):
    nm = K * n * F
    out = np.zeros(K)
    for k in range(K):
        load = 0.0
        for i in range(n):
            for j in range(F):
                if fixed:
                    sij = sizes[i, j]
                else:
                    sij = z[nm + i * F + j] * unit[j]
                load += z[k * n * F + i * F + j] * sij
        out[k] = (load - cap[k]) / cap_scale
    return out


@njit(cache=True)
def _pg_norm(z, grad, gidx, glen, lower, upper, lo, hi, work, tmp):
    for t in range(z.shape[0]):
        tmp[t] = z[t] - grad[t]
    project(tmp, gidx, glen, lower, upper, lo, hi, work)
    worst = 0.0
    for t in range(z.shape[0]):
        d = abs(work[t] - z[t])
        if d > worst:
            worst = d
    return worst


@njit(cache=True)
def _cap_step(alpha, grad):
    """Keep ``alpha * |grad|`` moderate so the projection stays accurate."""
    gmax = 0.0
    for t in range(grad.shape[0]):
        a = abs(grad[t])
        if a > gmax:
            gmax = a
    if gmax > 0.0 and alpha * gmax > 1e6:
        return 1e6 / gmax
    return alpha


@njit(cache=True)
def spg(z, K, n, F, unit, fixed, sizes, w, v, coeffs, T_d, cap, cap_scale, eps,
        lam, rho, mode, gidx, glen, lower, upper, lo, hi, tol, max_iter, memory, stall):
    """Non-monotone spectral projected gradient, in place on ``z``.

    Returns ``(iterations, evaluations, projected-gradient sup norm)``.
    """
    N = z.shape[0]
    work = np.empty(N)
    tmp = np.empty(N)
    grad = np.empty(N)
    g_new = np.empty(N)
    z_new = np.empty(N)
    d = np.empty(N)
    project(z, gidx, glen, lower, upper, lo, hi, work)
    z[:] = work
    value = fun_grad(z, K, n, F, unit, fixed, sizes, w, v, coeffs, T_d, cap, cap_scale,
                     eps, lam, rho, mode, grad)
    evals = 1
    hist = np.full(memory, -np.inf)
    hist[0] = value
    hpos = 1
    pg = _pg_norm(z, grad, gidx, glen, lower, upper, lo, hi, work, tmp)
    alpha = _cap_step(1.0 / max(pg, 1e-8), grad)
    iters = 0
    best = value
    since = 0
    while iters < max_iter and pg > tol:
        iters += 1
        if since >= stall:
            break  # no relative progress over the stall window
        for t in range(N):
            tmp[t] = z[t] - alpha * grad[t]
        project(tmp, gidx, glen, lower, upper, lo, hi, work)
        slope = 0.0
        for t in range(N):
            d[t] = work[t] - z[t]
            slope += grad[t] * d[t]
        if slope >= 0.0:
            # retry once with a plain gradient step before giving up
            alpha = _cap_step(1.0 / max(pg, 1e-8), grad)
            for t in range(N):
                tmp[t] = z[t] - alpha * grad[t]
            project(tmp, gidx, glen, lower, upper, lo, hi, work)
            slope = 0.0
            for t in range(N):
                d[t] = work[t] - z[t]
                slope += grad[t] * d[t]
            if slope >= 0.0:
                break
        ref = hist[0]
        for t in range(memory):
            if hist[t] > ref:
                ref = hist[t]
        step = 1.0
        while True:
            for t in range(N):
                z_new[t] = z[t] + step * d[t]
            v_new = fun_grad(z_new, K, n, F, unit, fixed, sizes, w, v, coeffs, T_d, cap,
                             cap_scale, eps, lam, rho, mode, g_new)
            evals += 1
            if v_new <= ref + 1e-4 * step * slope or step < 1e-14:
                break
            denom = 2.0 * (v_new - value - step * slope)
            trial = 0.5 * step
            if denom > 0.0:
                trial = -slope * step * step / denom
            if trial < 0.1 * step:
                trial = 0.1 * step
            if trial > 0.5 * step:
                trial = 0.5 * step
            step = trial
        sty = 0.0
        sts = 0.0
        for t in range(N):
            sk = z_new[t] - z[t]
            sty += sk * (g_new[t] - grad[t])
            sts += sk * sk
        if sty > 0.0:
            alpha = sts / sty
            if alpha < 1e-12:
                alpha = 1e-12
            elif alpha > 1e12:
                alpha = 1e12
        else:
            alpha = 1e12
        alpha = _cap_step(alpha, g_new)
        z[:] = z_new
        grad[:] = g_new
        value = v_new
        hist[hpos % memory] = value
        hpos += 1
        if value < best - 1e-10 * (1.0 + abs(best)):
            best = value
            since = 0
        else:
            since += 1
        pg = _pg_norm(z, grad, gidx, glen, lower, upper, lo, hi, work, tmp)
    return iters, evals, pg


@njit(cache=True)
def greedy_rates(t0, step, r_min, r_max, coeffs, v, w, counts, deficit, n, T_d, cap,
                 max_outer):
    """Single-file rate stepping with a fixed placement (equal packet sizes).

    ``t0`` holds the starting grid index of every file (rate
    ``r_min + t * step``).  ``counts[k, j]`` is the number of packets of
    file ``j`` on server ``k`` and ``deficit[j]`` the number of uncovered
    packets (``n`` minus coverage, clamped at zero).  Each pass evaluates
    every file's next step and adopts the best strictly improving feasible
    one.  Returns ``(t, passes, adopted)``.
    """
    K, F = counts.shape
    t = t0.copy()
    load = np.zeros(K)
    for k in range(K):
        for j in range(F):
            load[k] += counts[k, j] * (r_min[j] + t[j] * step) * T_d / n
    passes = 0
    adopted = 0
    while passes < max_outer:
        passes += 1
        best = 0.0
        best_j = -1
        for j in range(F):
            r0 = r_min[j] + t[j] * step
            r1 = r_min[j] + (t[j] + 1) * step
            if r1 > r_max[j] + 1e-12:
                continue
            grow = (r1 - r0) * T_d / n
            ok = True
            for k in range(K):
                if counts[k, j] > 0 and load[k] + counts[k, j] * grow > cap[k]:
                    ok = False
                    break
            if not ok:
                continue
            f0 = ((coeffs[j, 0] * r0 + coeffs[j, 1]) * r0 + coeffs[j, 2]) * r0 + coeffs[j, 3]
            f1 = ((coeffs[j, 0] * r1 + coeffs[j, 1]) * r1 + coeffs[j, 2]) * r1 + coeffs[j, 3]
            a0 = w[j] * deficit[j] * r0 * T_d / n
            a1 = w[j] * deficit[j] * r1 * T_d / n
            g0 = v[j] * np.cbrt(a0) ** 2
            g1 = v[j] * np.cbrt(a1) ** 2
            gain = (f1 - g1) - (f0 - g0)
            if gain > best:
                best = gain
                best_j = j
        if best_j < 0:
            break
        j = best_j
        r0 = r_min[j] + t[j] * step
        r1 = r_min[j] + (t[j] + 1) * step
        for k in range(K):
            load[k] += counts[k, j] * (r1 - r0) * T_d / n
        t[j] += 1
        adopted += 1
    return t, passes, adopted
