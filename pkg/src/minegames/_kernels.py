"""Compiled inner loops: one layer of each recurrence, the relative value
iteration driver, and the phase simulator."""

import numba as nb
import numpy as np

NEG_INF = -np.inf

MINE = 0
CAPITULATE = 1
RELEASE = 2


@nb.njit(cache=True, nogil=True)
def immediate_layer(p, d, prev, cur):
    """Write layer k of the immediate-release recurrence into ``cur``.

    Row ``b`` ascending, ``a`` descending, so ``cur[0, s]`` for ``s < b`` and
    ``cur[b, a + 1]`` are already final when ``cur[b, a]`` is computed.
    """
    q = 1.0 - p
    best_cap = NEG_INF
    for b in range(d + 1):
        cur[b, b + 1] = prev[0, 0] + (b + 1)
        for a in range(b, -1, -1):
            if b == d:
                cur[b, a] = best_cap
                continue
            v = p * cur[b, a + 1] + q * prev[b + 1, a]
            if best_cap > v:
                v = best_cap
            cur[b, a] = v
        if cur[b, 0] > best_cap:
            best_cap = cur[b, 0]


@nb.njit(cache=True, nogil=True)
def strategic_layer(p, d, a_max, prev, cur):
    """Write layer k of the strategic-release recurrence into ``cur``."""
    q = 1.0 - p
    best_cap = NEG_INF
    for b in range(d + 1):
        # the cap forces a release (a_max >= d + 2 > b + 1)
        cur[b, a_max] = prev[0, a_max - b - 1] + (b + 1)
        for a in range(a_max - 1, -1, -1):
            v = best_cap
            if a >= b + 1:
                r = prev[0, a - b - 1] + (b + 1)
                if r > v:
                    v = r
            if b < d:
                m = p * cur[b, a + 1] + q * prev[b + 1, a]
                if m > v:
                    v = m
            cur[b, a] = v
        if cur[b, 0] > best_cap:
            best_cap = cur[b, 0]


@nb.njit(cache=True, nogil=True)
def _n_cols(strategic, d, a_max, b):
    if strategic:
        return a_max + 1
    return b + 2


@nb.njit(cache=True, nogil=True)
def relative_value_iteration(strategic, p, d, a_max, tol, max_iter):
    """Iterate layers, re-anchoring each one at (0, 0).

    Returns ``(g, h, iterations, g_delta, residual, converged)`` where ``h``
    is the last layer shifted so ``h[0, 0] = 0``.
    """
    n_a = a_max + 1 if strategic else d + 2
    prev = np.zeros((d + 1, n_a))
    cur = np.zeros((d + 1, n_a))
    if not strategic:
        for b in range(d + 1):
            for a in range(b + 2, n_a):
                prev[b, a] = np.nan
                cur[b, a] = np.nan
    g_old = np.inf
    g = 0.0
    g_delta = np.inf
    residual = np.inf
    it = 0
    while it < max_iter:
        it += 1
        if strategic:
            strategic_layer(p, d, a_max, prev, cur)
        else:
            immediate_layer(p, d, prev, cur)
        g = cur[0, 0]
        residual = 0.0
        for b in range(d + 1):
            for a in range(_n_cols(strategic, d, a_max, b)):
                cur[b, a] -= g
                diff = abs(cur[b, a] - prev[b, a])
                if diff > residual:
                    residual = diff
        g_delta = abs(g - g_old)
        g_old = g
        tmp = prev
        prev = cur
        cur = tmp
        if g_delta < tol and residual < tol:
            return g, prev, it, g_delta, residual, True
    return g, prev, it, g_delta, residual, False


@nb.njit(cache=True, nogil=True)
def simulate_chunk(kind, landing, strategic, wins, state, counters, target_levels):
    """Advance one trial over the pre-drawn winners in ``wins``.

    ``state`` holds ``[a, b]`` and ``counters`` holds ``[levels, miner1_paid,
    miner2_paid, phases, max_lead, max_b]``; both are updated in place.
    Returns the number of draws consumed.
    """
    a = state[0]
    b = state[1]
    levels = counters[0]
    paid1 = counters[1]
    paid2 = counters[2]
    phases = counters[3]
    max_lead = counters[4]
    max_b = counters[5]
    i = 0
    n = wins.shape[0]
    while True:
        # capitulations and releases settle before the next draw
        while True:
            k = kind[b, a]
            if k == CAPITULATE:
                s = landing[b, a]
                paid2 += b - s
                a = 0
                b = s
            elif k == RELEASE:
                paid1 += b + 1
                levels += 1
                a = a - b - 1
                b = 0
            else:
                break
        if levels >= target_levels or i >= n:
            break
        w = wins[i]
        i += 1
        phases += 1
        if w:
            a += 1
        else:
            b += 1
            levels += 1
        if a - b > max_lead:
            max_lead = a - b
        if b > max_b:
            max_b = b
        if not strategic and a == b + 1:
            paid1 += a
            levels += 1
            a = 0
            b = 0
    state[0] = a
    state[1] = b
    counters[0] = levels
    counters[1] = paid1
    counters[2] = paid2
    counters[3] = phases
    counters[4] = max_lead
    counters[5] = max_b
    return i
