"""Pure numpy kernels. Same signatures and semantics as the compiled ``_kernels``.

Harvest and consumption are given per slot: ``H[j, i]`` is the energy policy
``j`` delivers to sensor ``i`` in one slot and ``c[i]`` is what the sensor
spends in one slot.
"""
from __future__ import annotations

import numpy as np

U1, U2, TABLE = 0, 1, 2


def utility(sigma, kind, scale, table):
    s = np.maximum(np.asarray(sigma, dtype=float), 0.0)
    if kind == U1:
        return scale * np.sqrt(s)
    if kind == U2:
        return scale * np.sqrt(s / (1.0 + s))
    table = np.asarray(table, dtype=float)
    nt = table.size
    pos = s * (nt - 1)
    k = np.minimum(pos.astype(np.int64), nt - 2)
    frac = pos - k
    return scale * (table[k] + frac * (table[k + 1] - table[k]))


def utility_grad(sigma, kind, scale, table):
    s = np.maximum(np.asarray(sigma, dtype=float), 1e-300)
    if kind == U1:
        return scale * 0.5 / np.sqrt(s)
    if kind == U2:
        return scale * 0.5 / (np.sqrt(s) * (1.0 + s) ** 1.5)
    table = np.asarray(table, dtype=float)
    nt = table.size
    k = np.minimum((s * (nt - 1)).astype(np.int64), nt - 2)
    return scale * (table[k + 1] - table[k]) * (nt - 1)


def _utility_curv(sigma, kind, scale):
    s = np.maximum(sigma, 1e-300)
    if kind == U1:
        return -scale * 0.25 / s ** 1.5
    return -scale * (1.0 + 4.0 * s) / (4.0 * s ** 1.5 * (1.0 + s) ** 2.5)


def policy_gains(H, q, c, Q, rem, kind, scale, table, capped=True):
    """Marginal objective gain of running each policy in the next slot.

    The end-of-round energy assumes the remaining ``rem`` slots stay idle. With
    ``capped=False`` the battery ceiling is ignored, which gives an upper bound
    on the gain at this and every later greedy step.
    """
    new = q - c + H
    if capped:
        new = np.minimum(new, Q)
    end = np.maximum(new - rem * c, 0.0)
    base = np.maximum(q - (rem + 1) * c, 0.0)
    terms = utility(end / Q, kind, scale, table) - utility(base / Q, kind, scale, table)
    return terms.sum(axis=1)


def greedy_schedule(H, q0, c, Q, n_slots, kind, scale, table):
    """Pick, slot by slot, the policy with the largest marginal gain (lowest index on ties)."""
    H = np.ascontiguousarray(H, dtype=float)
    q = np.array(q0, dtype=float)
    c = np.asarray(c, dtype=float)
    picks = np.empty(n_slots, dtype=np.int64)
    for n in range(n_slots):
        rem = n_slots - n - 1
        gains = policy_gains(H, q, c, Q, rem, kind, scale, table)
        j = int(np.argmax(gains))
        picks[n] = j
        q = np.maximum(np.minimum(q - c + H[j], Q), 0.0)
    return picks, q


def _line_search(q, dq, gmax, Q, kind, scale, table):
    """argmax over [0, gmax] of sum_i U((q + g*dq)/Q) (concave in g)."""
    def slope(g):
        return float(np.dot(utility_grad((q + g * dq) / Q, kind, scale, table), dq)) / Q

    if slope(gmax) >= 0.0:
        return gmax
    lo, hi = 0.0, gmax
    g = 0.5 * gmax
    for _ in range(100):
        d = slope(g)
        if d > 0:
            lo = g
        else:
            hi = g
        if hi - lo <= 1e-15 * gmax:
            break
        nxt = 0.5 * (lo + hi)
        if kind != TABLE:
            curv = float(np.dot(_utility_curv((q + g * dq) / Q, kind, scale), dq * dq)) / (Q * Q)
            if curv < 0:
                newton = g - d / curv
                if lo < newton < hi:
                    nxt = newton
        if nxt == g:
            break
        g = nxt
    return g


def fw_p1(P, C, Q, T_c, kind, scale, table, tol=1e-6, max_iter=10000):
    """Away-step conditional gradient for max sum_i U((C + T_c * lam @ P)/Q) over the simplex.

    Returns ``(t, objective, gap, iterations)`` with ``t = T_c * lam``. The
    objective excludes the constant sum_i U(C_i/Q).
    """
    P = np.ascontiguousarray(P, dtype=float)
    C = np.asarray(C, dtype=float)
    G = P.shape[0]
    vert_q = C[None, :] + T_c * P
    vert_val = utility(vert_q / Q, kind, scale, table).sum(axis=1)
    best_vertex = int(np.argmax(vert_val))
    lam = np.zeros(G)
    lam[best_vertex] = 1.0
    h = P[best_vertex].copy()
    gap = 0.0
    it = 0
    for it in range(max_iter):
        q = C + T_c * h
        val = float(utility(q / Q, kind, scale, table).sum())
        grad = utility_grad(q / Q, kind, scale, table) * (T_c / Q)
        g = P @ grad
        s = int(np.argmax(g))
        g_lam = float(np.dot(g, lam))
        gap = g[s] - g_lam
        if gap <= tol * max(abs(val), 1e-300):
            break
        support = np.flatnonzero(lam > 0)
        a = int(support[np.argmin(g[support])])
        away_gain = g_lam - g[a]
        if gap >= away_gain or lam[a] >= 1.0:
            dh = P[s] - h
            gmax = 1.0
            fw = True
        else:
            dh = h - P[a]
            gmax = lam[a] / (1.0 - lam[a])
            fw = False
        step = _line_search(q, T_c * dh, gmax, Q, kind, scale, table)
        if step <= 0.0:
            break
        if fw:
            lam *= 1.0 - step
            lam[s] += step
            if step >= 1.0:
                lam[:] = 0.0
                lam[s] = 1.0
        else:
            lam *= 1.0 + step
            lam[a] -= step
            if step >= gmax:
                lam[a] = 0.0
        h = h + step * dh
    q = C + T_c * h
    val = float(utility(q / Q, kind, scale, table).sum())
    if vert_val[best_vertex] > val:
        lam = np.zeros(G)
        lam[best_vertex] = 1.0
        val = float(vert_val[best_vertex])
    return T_c * lam, val, float(gap), it + 1
