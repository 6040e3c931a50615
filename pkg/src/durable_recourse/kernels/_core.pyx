# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_fallback``; same signatures."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, exp, expm1, fabs, isfinite

cnp.import_array()


cdef inline double _attain(double xf, double xcf) nogil:
    cdef double denom = fabs(xcf - xf) * xcf
    if denom == 0.0:
        return INFINITY
    return 1.0 / denom - 1.0


cdef inline double _success(double xf, double xcf, double d, double beta) nogil:
    cdef double a = _attain(xf, xcf)
    if not isfinite(a) or d == 0.0:
        return 1.0
    return -expm1(-beta * a / d)


def attainability(x_f, x_cf):
    xf_b, xcf_b = np.broadcast_arrays(np.asarray(x_f, dtype=np.float64),
                                      np.asarray(x_cf, dtype=np.float64))
    cdef const double[::1] xf = np.ascontiguousarray(xf_b).ravel()
    cdef const double[::1] xcf = np.ascontiguousarray(xcf_b).ravel()
    out = np.empty(xf.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(xf.shape[0]):
        o[i] = _attain(xf[i], xcf[i])
    return out.reshape(xf_b.shape)


def success_probability(x_f, x_cf, d, double beta):
    cdef const double[:, ::1] xf = np.ascontiguousarray(x_f, dtype=np.float64)
    cdef const double[:, ::1] xcf = np.ascontiguousarray(x_cf, dtype=np.float64)
    cdef const double[::1] dd = np.ascontiguousarray(d, dtype=np.float64)
    cdef Py_ssize_t n = xf.shape[0], z = xf.shape[1], i, j
    out = np.empty((n, z))
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(z):
            o[i, j] = _success(xf[i, j], xcf[i, j], dd[j], beta)
    return out


def dropout_probability(b, q, double rho, double chi, double omega):
    bb, qq = np.broadcast_arrays(np.asarray(b, dtype=np.float64), np.asarray(q, dtype=np.float64))
    cdef const double[::1] bv = np.ascontiguousarray(bb).ravel()
    cdef const double[::1] qv = np.ascontiguousarray(qq).ravel()
    out = np.empty(bv.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(bv.shape[0]):
        o[i] = -expm1(-(rho * bv[i] + chi * qv[i] + omega * bv[i] * qv[i]))
    return out.reshape(bb.shape)


def reapply_probability(b, u, double nu):
    bb, uu = np.broadcast_arrays(np.asarray(b, dtype=np.float64), np.asarray(u, dtype=np.float64))
    cdef const double[::1] bv = np.ascontiguousarray(bb).ravel()
    cdef const double[::1] uv = np.ascontiguousarray(uu).ravel()
    out = np.empty(bv.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(bv.shape[0]):
        o[i] = (1.0 - uv[i]) * exp(-nu * bv[i]) + uv[i]
    return out.reshape(bb.shape)


def attempt_features(x_f, x_cf, mask, d, double beta, uniforms):
    cdef const double[:, ::1] xf = np.ascontiguousarray(x_f, dtype=np.float64)
    cdef const double[:, ::1] xcf = np.ascontiguousarray(x_cf, dtype=np.float64)
    cdef const cnp.uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef const double[::1] dd = np.ascontiguousarray(d, dtype=np.float64)
    cdef const double[:, ::1] un = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t n = xf.shape[0], z = xf.shape[1], i, j
    new_x = np.empty((n, z))
    new_mask = np.empty((n, z), dtype=bool)
    outcome = np.empty((n, z), dtype=np.int64)
    cdef double[:, ::1] nx = new_x
    cdef cnp.uint8_t[:, ::1] nm = new_mask.view(np.uint8)
    cdef cnp.int64_t[:, ::1] oc = outcome
    for i in range(n):
        for j in range(z):
            if m[i, j]:
                nx[i, j] = xf[i, j]
                nm[i, j] = 1
                oc[i, j] = -1
            elif un[i, j] < _success(xf[i, j], xcf[i, j], dd[j], beta):
                nx[i, j] = xcf[i, j]
                nm[i, j] = 1
                oc[i, j] = 1
            else:
                nx[i, j] = xf[i, j]
                nm[i, j] = 0
                oc[i, j] = 0
    return new_x, new_mask, outcome


# above this size the sort-based forms beat the quadratic loops
SMALL_N = 64


def gini_pairwise(g):
    cdef const double[::1] v = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0], i, j
    cdef double num = 0.0, total = 0.0
    cdef const double[::1] srt
    if n > SMALL_N:
        # sum_{i,j} |g_i - g_j| = 2 * sum_i (2i - n - 1) g_(i) over sorted g
        srt = np.sort(np.asarray(v))
        for i in range(n):
            total += srt[i]
            num += (2.0 * (i + 1) - n - 1.0) * srt[i]
        return 2.0 * num / (2.0 * n * total)
    for i in range(n):
        total += v[i]
        for j in range(n):
            num += fabs(v[j] - v[i])
    return num / (2.0 * n * total)


def topk(scores, ids, Py_ssize_t k):
    cdef const double[::1] s = np.ascontiguousarray(scores, dtype=np.float64)
    cdef const cnp.int64_t[::1] idv = np.ascontiguousarray(ids, dtype=np.int64)
    cdef Py_ssize_t n = s.shape[0], i, j, best
    if k > n:
        k = n
    if n > SMALL_N:
        return np.lexsort((np.asarray(idv), -np.asarray(s)))[:k]
    taken = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] tk = taken
    out = np.empty(k, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    # selection sort: k and n are tens of candidates per round
    for i in range(k):
        best = -1
        for j in range(n):
            if tk[j]:
                continue
            if best < 0 or s[j] > s[best] or (s[j] == s[best] and idv[j] < idv[best]):
                best = j
        tk[best] = 1
        o[i] = best
    return out


def greedy_l1(x, w, double gain, double upper=1.0, double lower=0.0):
    x_cf = np.array(x, dtype=np.float64)
    cdef double[::1] xc = x_cf
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef cnp.int64_t[::1] order = np.argsort(-np.abs(np.asarray(wv)), kind="stable").astype(np.int64)
    cdef double remaining = gain, room, step, aw
    cdef Py_ssize_t k, i
    for k in range(order.shape[0]):
        i = order[k]
        if remaining <= 0.0 or wv[i] == 0.0:
            break
        aw = fabs(wv[i])
        room = (upper - xc[i]) if wv[i] > 0 else (xc[i] - lower)
        step = remaining / aw
        if room < step:
            step = room
        if wv[i] > 0:
            xc[i] += step
        else:
            xc[i] -= step
        remaining -= step * aw
    return x_cf, remaining
