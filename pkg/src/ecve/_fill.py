"""Deterministic placement heuristics at fixed, equal packet sizes."""
from __future__ import annotations

import numpy as np

from .qoe import min_secure_packets


def packet_sizes(scenario, rates):
    """Equal per-packet size of every file at ``rates`` (Mbps)."""
    return np.asarray(rates, dtype=float) * scenario.T_d / scenario.n


def secure_fill(scenario, rates):
    """Cache the fewest secure packets per file on the roomiest server; ``None`` if they do not fit."""
    K, n, F = scenario.shape
    size = packet_sizes(scenario, rates)
    room = scenario.capacity.copy()
    m = np.zeros((K, n, F), dtype=bool)
    for j in range(F):
        for i in range(min_secure_packets(n, scenario.requests[j])):
            k = int(np.argmax(room))
            if room[k] < size[j]:
                return None
            m[k, i, j] = True
            room[k] -= size[j]
    return m


def fill_remaining(scenario, rates, m):
    """Add uncached packets in popularity order wherever they still fit (first server that fits)."""
    K, n, F = scenario.shape
    size = packet_sizes(scenario, rates)
    m = m.copy()
    room = scenario.capacity - np.einsum("kij,j->k", m, size)
    cover = m.any(axis=0)
    for j in range(F):
        for i in range(n):
            if cover[i, j]:
                continue
            for k in range(K):
                if room[k] >= size[j]:
                    m[k, i, j] = True
                    room[k] -= size[j]
                    cover[i, j] = True
                    break
    return m


def equal_count_fill(scenario, rates):
    """ECST-like placement: equal per-server counts, greedy by descending ``Psi_j * size_j``.

    Every server holds the same number ``c_j`` of distinct packets of file
    ``j``; the binding capacity is the smallest server.  Returns ``None``
    when the secrecy minimum cannot be met.
    """
    K, n, F = scenario.shape
    size = packet_sizes(scenario, rates)
    top = n // K
    need = np.array([-(-min_secure_packets(n, scenario.requests[j]) // K) for j in range(F)])
    if np.any(need > top):
        return None
    budget = float(scenario.capacity.min())
    counts = need.copy()
    budget -= float(np.sum(counts * size))
    if budget < -1e-9 * max(1.0, float(np.sum(counts * size))):
        return None
    order = sorted(range(F), key=lambda j: (-scenario.requests[j] * size[j], j))
    for j in order:
        if size[j] <= 0:
            counts[j] = top
            continue
        extra = int(min(top - counts[j], np.floor(budget / size[j] + 1e-9)))
        if extra > 0:
            counts[j] += extra
            budget -= extra * size[j]
    m = np.zeros((K, n, F), dtype=bool)
    for j in range(F):
        c = int(counts[j])
        for k in range(K):
            m[k, k * c:(k + 1) * c, j] = True
    return m
