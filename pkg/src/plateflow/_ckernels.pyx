# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-element kernels; same contracts as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _cross(double* a, double* b, double* out) noexcept nogil:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


cdef inline void _element_state(const double[:, :, ::1] hess, const double[:, :, :, ::1] grad,
                                const double[:, :, :, ::1] Z, const double[:, :, ::1] yloc,
                                Py_ssize_t t, double* zc, double* k, double* g1, double* g2) noexcept nogil:
    # zc[q*3+j], k[q*3+m], g1[q*3+m], g2[q*3+m]
    cdef double hy[9]
    cdef Py_ssize_t q, j, m, d
    cdef double s
    for m in range(3):
        for j in range(3):
            s = 0.0
            for d in range(6):
                s += hess[t, j, d] * yloc[t, m, d]
            hy[m * 3 + j] = s
    for q in range(3):
        zc[q * 3 + 0] = Z[t, q, 0, 0]
        zc[q * 3 + 1] = Z[t, q, 0, 1] + Z[t, q, 1, 0]
        zc[q * 3 + 2] = Z[t, q, 1, 1]
        for m in range(3):
            k[q * 3 + m] = (zc[q * 3] * hy[m * 3] + zc[q * 3 + 1] * hy[m * 3 + 1]
                            + zc[q * 3 + 2] * hy[m * 3 + 2])
            s = 0.0
            for d in range(6):
                s += grad[t, q, 0, d] * yloc[t, m, d]
            g1[q * 3 + m] = s
            s = 0.0
            for d in range(6):
                s += grad[t, q, 1, d] * yloc[t, m, d]
            g2[q * 3 + m] = s


def cubic_energy(const double[:, :, ::1] hess, const double[:, :, :, ::1] grad,
                 const double[::1] area, const double[:, :, :, ::1] Z,
                 const double[:, :, ::1] yloc):
    cdef Py_ssize_t nT = hess.shape[0], t, q
    cdef double zc[9]
    cdef double k[9]
    cdef double g1[9]
    cdef double g2[9]
    cdef double n[3]
    cdef double total = 0.0, acc
    with nogil:
        for t in range(nT):
            _element_state(hess, grad, Z, yloc, t, zc, k, g1, g2)
            acc = 0.0
            for q in range(3):
                _cross(&g1[q * 3], &g2[q * 3], n)
                acc += k[q * 3] * n[0] + k[q * 3 + 1] * n[1] + k[q * 3 + 2] * n[2]
            total += area[t] / 3.0 * acc
    return total


def cubic_gradient(const double[:, :, ::1] hess, const double[:, :, :, ::1] grad,
                   const double[::1] area, const double[:, :, :, ::1] Z,
                   const double[:, :, ::1] yloc):
    cdef Py_ssize_t nT = hess.shape[0], t, q, m, d
    out_arr = np.zeros((nT, 3, 6))
    cdef double[:, :, ::1] out = out_arr
    cdef double zc[9]
    cdef double k[9]
    cdef double g1[9]
    cdef double g2[9]
    cdef double n[3]
    cdef double a[3]
    cdef double b[3]
    cdef double zh, w
    with nogil:
        for t in range(nT):
            _element_state(hess, grad, Z, yloc, t, zc, k, g1, g2)
            w = area[t] / 3.0
            for q in range(3):
                _cross(&g1[q * 3], &g2[q * 3], n)
                _cross(&g2[q * 3], &k[q * 3], a)
                _cross(&k[q * 3], &g1[q * 3], b)
                for d in range(6):
                    zh = zc[q * 3] * hess[t, 0, d] + zc[q * 3 + 1] * hess[t, 1, d] + zc[q * 3 + 2] * hess[t, 2, d]
                    for m in range(3):
                        out[t, m, d] += w * (zh * n[m] + grad[t, q, 0, d] * a[m] + grad[t, q, 1, d] * b[m])
    return out_arr


def constraint_rows(const double[:, :, :, ::1] grad, const double[::1] area,
                    const double[:, :, ::1] yloc):
    cdef Py_ssize_t nT = grad.shape[0], t, q, m, d
    out_arr = np.zeros((nT, 3, 3, 6))
    cdef double[:, :, :, ::1] out = out_arr
    cdef double g1, g2, w, s1, s2
    with nogil:
        for t in range(nT):
            w = area[t] / 3.0
            for q in range(3):
                for m in range(3):
                    g1 = 0.0
                    g2 = 0.0
                    for d in range(6):
                        g1 += grad[t, q, 0, d] * yloc[t, m, d]
                        g2 += grad[t, q, 1, d] * yloc[t, m, d]
                    for d in range(6):
                        s1 = grad[t, q, 0, d]
                        s2 = grad[t, q, 1, d]
                        out[t, 0, m, d] += 2.0 * w * s1 * g1
                        out[t, 1, m, d] += w * (s1 * g2 + s2 * g1)
                        out[t, 2, m, d] += 2.0 * w * s2 * g2
    return out_arr


def metric_defect(const double[:, :, :, ::1] grad, const double[::1] area,
                  const double[:, :, :, ::1] g, const double[:, :, ::1] yloc):
    cdef Py_ssize_t nT = grad.shape[0], t, q, m, d
    out_arr = np.zeros((nT, 2, 2))
    cdef double[:, :, ::1] out = out_arr
    cdef double g1, g2, w, f11, f12, f22
    with nogil:
        for t in range(nT):
            w = area[t] / 3.0
            for q in range(3):
                f11 = 0.0
                f12 = 0.0
                f22 = 0.0
                for m in range(3):
                    g1 = 0.0
                    g2 = 0.0
                    for d in range(6):
                        g1 += grad[t, q, 0, d] * yloc[t, m, d]
                        g2 += grad[t, q, 1, d] * yloc[t, m, d]
                    f11 += g1 * g1
                    f12 += g1 * g2
                    f22 += g2 * g2
                out[t, 0, 0] += w * (f11 - g[t, q, 0, 0])
                out[t, 0, 1] += w * (f12 - g[t, q, 0, 1])
                out[t, 1, 0] += w * (f12 - g[t, q, 1, 0])
                out[t, 1, 1] += w * (f22 - g[t, q, 1, 1])
    return out_arr
