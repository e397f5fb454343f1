# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled gauge kernels.

Same names, signatures and results as ``_fallback``; see there for the
argument conventions.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport pow

cnp.import_array()


def running_sup_sq(const double[:, :, ::1] values):
    cdef Py_ssize_t s, k, j
    cdef Py_ssize_t n_s = values.shape[0], n_l = values.shape[1], n_d = values.shape[2]
    out = np.empty((n_s, n_l), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double acc, sq, v
    with nogil:
        for s in range(n_s):
            acc = 0.0
            for k in range(n_l):
                sq = 0.0
                for j in range(n_d):
                    v = values[s, k, j]
                    sq += v * v
                if sq > acc:
                    acc = sq
                o[s, k] = acc
    return out


cdef inline void _terms(double sup_sq, const double* x, Py_ssize_t d, int m,
                        double* ups, double* grad, double* hess) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double x2 = 0.0, r, one_r, g, bracket, pw1, pw2, outer, diag
    for i in range(d):
        x2 += x[i] * x[i]
    if sup_sq <= 0.0:
        ups[0] = 0.0
        for i in range(d):
            grad[i] = 0.0
            for j in range(d):
                hess[i * d + j] = 0.0
        return
    r = x2 / sup_sq
    if r > 1.0:
        r = 1.0
    r = pow(r, m)
    one_r = 1.0 - r
    g = one_r * one_r * one_r + 3.0 * r
    if g < 1.0:
        g = 1.0
    elif g > 3.0:
        g = 3.0
    ups[0] = pow(sup_sq, m) * g
    bracket = 1.0 - one_r * one_r
    if bracket < 0.0:
        bracket = 0.0
    elif bracket > 1.0:
        bracket = 1.0
    pw1 = pow(x2, m - 1)
    pw2 = pow(x2, m - 2)
    outer = 24.0 * m * m * one_r * r * pw2 + 12.0 * m * (m - 1) * bracket * pw2
    diag = 6.0 * m * bracket * pw1
    for i in range(d):
        grad[i] = diag * x[i]
        for j in range(d):
            hess[i * d + j] = outer * (x[i] * x[j])
        hess[i * d + i] += diag


def upsilon_terms(sup_sq, term, int m):
    cdef const double[::1] ss = np.ascontiguousarray(sup_sq, dtype=np.float64)
    cdef const double[:, ::1] tt = np.ascontiguousarray(term, dtype=np.float64)
    cdef Py_ssize_t n_k = tt.shape[0], d = tt.shape[1], k
    ups = np.empty(n_k, dtype=np.float64)
    grad = np.empty((n_k, d), dtype=np.float64)
    hess = np.empty((n_k, d, d), dtype=np.float64)
    cdef double[::1] u = ups
    cdef double[:, ::1] gr = grad
    cdef double[:, :, ::1] he = hess
    if n_k == 0:
        return ups, grad, hess
    with nogil:
        for k in range(n_k):
            _terms(ss[k], &tt[k, 0], d, m, &u[k], &gr[k, 0], &he[k, 0, 0])
    return ups, grad, hess


def upsilon_prefixes(const double[:, :, ::1] values, int m):
    cdef Py_ssize_t n_s = values.shape[0], n_l = values.shape[1], d = values.shape[2]
    cdef Py_ssize_t s, k, j
    ups = np.empty((n_s, n_l), dtype=np.float64)
    grad = np.empty((n_s, n_l, d), dtype=np.float64)
    hess = np.empty((n_s, n_l, d, d), dtype=np.float64)
    cdef double[:, ::1] u = ups
    cdef double[:, :, ::1] gr = grad
    cdef double[:, :, :, ::1] he = hess
    cdef double acc, sq, v
    if n_s == 0 or n_l == 0:
        return ups, grad, hess
    with nogil:
        for s in range(n_s):
            acc = 0.0
            for k in range(n_l):
                sq = 0.0
                for j in range(d):
                    v = values[s, k, j]
                    sq += v * v
                if sq > acc:
                    acc = sq
                _terms(acc, &values[s, k, 0], d, m, &u[s, k], &gr[s, k, 0], &he[s, k, 0, 0])
    return ups, grad, hess


def upsilon_bar0_many(center, Py_ssize_t center_end, points, point_ends, int m, double step):
    cdef const double[:, ::1] c = np.ascontiguousarray(center, dtype=np.float64)
    cdef const double[:, :, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef const long long[::1] ends = np.ascontiguousarray(point_ends, dtype=np.int64)
    cdef Py_ssize_t n_p = pts.shape[0], d = pts.shape[2]
    cdef Py_ssize_t p, k, j, e, horizon, ci, pi
    out = np.empty(n_p, dtype=np.float64)
    cdef double[::1] o = out
    diff_buf = np.empty(d, dtype=np.float64)
    scratch = np.empty(d + d * d, dtype=np.float64)
    cdef double[::1] diff = diff_buf
    cdef double[::1] scr = scratch
    cdef double sup_sq, sq, v, ups, gap
    if n_p == 0:
        return out
    with nogil:
        for p in range(n_p):
            e = ends[p]
            horizon = e if e > center_end else center_end
            sup_sq = 0.0
            for k in range(horizon + 1):
                ci = k if k < center_end else center_end
                pi = k if k < e else e
                sq = 0.0
                for j in range(d):
                    v = pts[p, pi, j] - c[ci, j]
                    diff[j] = v
                    sq += v * v
                if sq > sup_sq:
                    sup_sq = sq
            _terms(sup_sq, &diff[0], d, m, &ups, &scr[0], &scr[d])
            gap = (e - center_end) * step
            o[p] = ups + gap * gap
    return out
