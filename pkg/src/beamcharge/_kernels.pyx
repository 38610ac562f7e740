# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Mirrors ``_kernels_py`` call for call."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, fabs, fmax, fmin

cnp.import_array()

U1 = 0
U2 = 1
TABLE = 2


cdef inline double _u(double s, int kind, double scale, const double[::1] table) noexcept nogil:
    cdef Py_ssize_t nt, k
    cdef double pos
    if s < 0.0:
        s = 0.0
    if kind == 0:
        return scale * sqrt(s)
    if kind == 1:
        return scale * sqrt(s / (1.0 + s))
    nt = table.shape[0]
    pos = s * (nt - 1)
    k = <Py_ssize_t>pos
    if k > nt - 2:
        k = nt - 2
    return scale * (table[k] + (pos - k) * (table[k + 1] - table[k]))


cdef inline double _du(double s, int kind, double scale, const double[::1] table) noexcept nogil:
    cdef Py_ssize_t nt, k
    if s < 1e-300:
        s = 1e-300
    if kind == 0:
        return scale * 0.5 / sqrt(s)
    if kind == 1:
        return scale * 0.5 / (sqrt(s) * pow(1.0 + s, 1.5))
    nt = table.shape[0]
    k = <Py_ssize_t>(s * (nt - 1))
    if k > nt - 2:
        k = nt - 2
    return scale * (table[k + 1] - table[k]) * (nt - 1)


cdef inline double _d2u(double s, int kind, double scale) noexcept nogil:
    if s < 1e-300:
        s = 1e-300
    if kind == 0:
        return -scale * 0.25 / pow(s, 1.5)
    return -scale * (1.0 + 4.0 * s) / (4.0 * pow(s, 1.5) * pow(1.0 + s, 2.5))


def utility(sigma, int kind, double scale, table):
    cdef const double[::1] tb = np.ascontiguousarray(table, dtype=np.float64)
    arr = np.asarray(sigma, dtype=np.float64)
    flat = np.ascontiguousarray(arr).ravel()
    out = np.empty_like(flat)
    cdef const double[::1] s = flat
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(s.shape[0]):
        o[i] = _u(s[i], kind, scale, tb)
    return out.reshape(arr.shape) if arr.ndim else out[0]


def utility_grad(sigma, int kind, double scale, table):
    cdef const double[::1] tb = np.ascontiguousarray(table, dtype=np.float64)
    arr = np.asarray(sigma, dtype=np.float64)
    flat = np.ascontiguousarray(arr).ravel()
    out = np.empty_like(flat)
    cdef const double[::1] s = flat
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(s.shape[0]):
        o[i] = _du(s[i], kind, scale, tb)
    return out.reshape(arr.shape) if arr.ndim else out[0]


cdef void _gains(const double[:, ::1] H, const double[::1] q, const double[::1] c, double Q,
                 Py_ssize_t rem, int kind, double scale, const double[::1] tb, bint capped,
                 double[::1] out, double[::1] ubase) noexcept nogil:
    cdef Py_ssize_t G = H.shape[0], N = H.shape[1], j, i
    cdef double acc, new, end
    # idle-end utility does not depend on the policy
    for i in range(N):
        ubase[i] = _u(fmax(q[i] - (rem + 1) * c[i], 0.0) / Q, kind, scale, tb)
    for j in range(G):
        acc = 0.0
        for i in range(N):
            new = q[i] - c[i] + H[j, i]
            if capped and new > Q:
                new = Q
            end = fmax(new - rem * c[i], 0.0)
            acc += _u(end / Q, kind, scale, tb) - ubase[i]
        out[j] = acc


def policy_gains(H, q, c, double Q, Py_ssize_t rem, int kind, double scale, table, bint capped=True):
    cdef const double[:, ::1] Hv = np.ascontiguousarray(H, dtype=np.float64)
    cdef const double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef const double[::1] tb = np.ascontiguousarray(table, dtype=np.float64)
    out = np.empty(Hv.shape[0])
    _gains(Hv, qv, cv, Q, rem, kind, scale, tb, capped, out, np.empty(Hv.shape[1]))
    return out


def greedy_schedule(H, q0, c, double Q, Py_ssize_t n_slots, int kind, double scale, table):
    cdef const double[:, ::1] Hv = np.ascontiguousarray(H, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef const double[::1] tb = np.ascontiguousarray(table, dtype=np.float64)
    q_arr = np.array(q0, dtype=np.float64)
    cdef double[::1] q = q_arr
    gains_arr = np.empty(Hv.shape[0])
    cdef double[::1] gains = gains_arr
    cdef double[::1] ubase = np.empty(Hv.shape[1])
    picks_arr = np.empty(n_slots, dtype=np.int64)
    cdef cnp.int64_t[::1] picks = picks_arr
    cdef Py_ssize_t n, j, best, i, G = Hv.shape[0], N = Hv.shape[1]
    cdef double v
    with nogil:
        for n in range(n_slots):
            _gains(Hv, q, cv, Q, n_slots - n - 1, kind, scale, tb, True, gains, ubase)
            best = 0
            for j in range(1, G):
                if gains[j] > gains[best]:
                    best = j
            picks[n] = best
            for i in range(N):
                v = q[i] - cv[i] + Hv[best, i]
                q[i] = fmax(fmin(v, Q), 0.0)
    return picks_arr, q_arr


cdef double _objective(const double[::1] C, const double[::1] h, double T_c, double Q,
                       int kind, double scale, const double[::1] tb) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(C.shape[0]):
        acc += _u((C[i] + T_c * h[i]) / Q, kind, scale, tb)
    return acc


cdef double _slope(const double[::1] q, const double[::1] dq, double g, double Q,
                   int kind, double scale, const double[::1] tb) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(q.shape[0]):
        acc += _du((q[i] + g * dq[i]) / Q, kind, scale, tb) * dq[i]
    return acc / Q


cdef double _curv(const double[::1] q, const double[::1] dq, double g, double Q,
                  int kind, double scale) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(q.shape[0]):
        acc += _d2u((q[i] + g * dq[i]) / Q, kind, scale) * dq[i] * dq[i]
    return acc / (Q * Q)


cdef double _line_search(const double[::1] q, const double[::1] dq, double gmax, double Q,
                         int kind, double scale, const double[::1] tb) noexcept nogil:
    cdef double lo = 0.0, hi = gmax, g = 0.5 * gmax, d, nxt, curv, newton
    cdef int it
    if _slope(q, dq, gmax, Q, kind, scale, tb) >= 0.0:
        return gmax
    for it in range(100):
        d = _slope(q, dq, g, Q, kind, scale, tb)
        if d > 0:
            lo = g
        else:
            hi = g
        if hi - lo <= 1e-15 * gmax:
            break
        nxt = 0.5 * (lo + hi)
        if kind != 2:
            curv = _curv(q, dq, g, Q, kind, scale)
            if curv < 0:
                newton = g - d / curv
                if lo < newton and newton < hi:
                    nxt = newton
        if nxt == g:
            break
        g = nxt
    return g


def fw_p1(P, C, double Q, double T_c, int kind, double scale, table, double tol=1e-6,
          Py_ssize_t max_iter=10000):
    cdef const double[:, ::1] Pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef const double[::1] Cv = np.ascontiguousarray(C, dtype=np.float64)
    cdef const double[::1] tb = np.ascontiguousarray(table, dtype=np.float64)
    cdef Py_ssize_t G = Pv.shape[0], N = Pv.shape[1], j, i, s, a, best_vertex = 0, it = 0
    cdef double val, best_val = -1e300, gap = 0.0, g_lam, away_gain, gmax, step, w
    cdef bint fw
    lam_arr = np.zeros(G)
    h_arr = np.zeros(N)
    q_arr = np.empty(N)
    dq_arr = np.empty(N)
    dh_arr = np.empty(N)
    grad_arr = np.empty(N)
    g_arr = np.empty(G)
    cdef double[::1] lam = lam_arr, h = h_arr, q = q_arr, dq = dq_arr, dh = dh_arr
    cdef double[::1] grad = grad_arr, gv = g_arr
    with nogil:
        for j in range(G):
            val = 0.0
            for i in range(N):
                val += _u((Cv[i] + T_c * Pv[j, i]) / Q, kind, scale, tb)
            if val > best_val:
                best_val = val
                best_vertex = j
        lam[best_vertex] = 1.0
        for i in range(N):
            h[i] = Pv[best_vertex, i]
        for it in range(max_iter):
            for i in range(N):
                q[i] = Cv[i] + T_c * h[i]
            val = _objective(Cv, h, T_c, Q, kind, scale, tb)
            for i in range(N):
                grad[i] = _du(q[i] / Q, kind, scale, tb) * (T_c / Q)
            s = 0
            g_lam = 0.0
            a = -1
            for j in range(G):
                w = 0.0
                for i in range(N):
                    w += Pv[j, i] * grad[i]
                gv[j] = w
                if w > gv[s]:
                    s = j
                g_lam += w * lam[j]
                if lam[j] > 0 and (a < 0 or w < gv[a]):
                    a = j
            gap = gv[s] - g_lam
            if gap <= tol * fmax(fabs(val), 1e-300):
                break
            away_gain = g_lam - gv[a]
            if gap >= away_gain or lam[a] >= 1.0:
                for i in range(N):
                    dh[i] = Pv[s, i] - h[i]
                gmax = 1.0
                fw = True
            else:
                for i in range(N):
                    dh[i] = h[i] - Pv[a, i]
                gmax = lam[a] / (1.0 - lam[a])
                fw = False
            for i in range(N):
                dq[i] = T_c * dh[i]
            step = _line_search(q, dq, gmax, Q, kind, scale, tb)
            if step <= 0.0:
                break
            if fw:
                for j in range(G):
                    lam[j] *= 1.0 - step
                lam[s] += step
                if step >= 1.0:
                    for j in range(G):
                        lam[j] = 0.0
                    lam[s] = 1.0
            else:
                for j in range(G):
                    lam[j] *= 1.0 + step
                lam[a] -= step
                if step >= gmax:
                    lam[a] = 0.0
            for i in range(N):
                h[i] = h[i] + step * dh[i]
        val = _objective(Cv, h, T_c, Q, kind, scale, tb)
        if best_val > val:
            for j in range(G):
                lam[j] = 0.0
            lam[best_vertex] = 1.0
            val = best_val
    return T_c * lam_arr, float(val), float(gap), int(it + 1)
