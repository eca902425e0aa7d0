# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pointwise kernels; same contracts as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _load(double[:, :, ::1] M, Py_ssize_t p, int d, double out[3][3]) noexcept nogil:
    cdef int i, j
    for i in range(d):
        for j in range(d):
            out[i][j] = M[i, j, p]


cdef inline void _mm(double A[3][3], double B[3][3], int d, double out[3][3]) noexcept nogil:
    cdef int i, j, k
    cdef double acc
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for k in range(d):
                acc += A[i][k] * B[k][j]
            out[i][j] = acc


def commutator(double[:, :, ::1] A, double[:, :, ::1] B):
    cdef int d = A.shape[0]
    cdef Py_ssize_t npts = A.shape[2], p
    cdef int i, j
    cdef double a[3][3]
    cdef double b[3][3]
    cdef double ab[3][3]
    cdef double ba[3][3]
    result = np.empty((d, d, npts))
    cdef double[:, :, ::1] out = result
    with nogil:
        for p in range(npts):
            _load(A, p, d, a)
            _load(B, p, d, b)
            _mm(a, b, d, ab)
            _mm(b, a, d, ba)
            for i in range(d):
                for j in range(d):
                    out[i, j, p] = ab[i][j] - ba[i][j]
    return result


def reaction(double[:, :, ::1] Q, double a, double b, double c):
    cdef int d = Q.shape[0]
    cdef Py_ssize_t npts = Q.shape[2], p
    cdef int i, j
    cdef double q[3][3]
    cdef double q2[3][3]
    cdef double norm2
    result = np.empty((d, d, npts))
    cdef double[:, :, ::1] out = result
    with nogil:
        for p in range(npts):
            _load(Q, p, d, q)
            _mm(q, q, d, q2)
            norm2 = 0.0
            for i in range(d):
                norm2 += q2[i][i]
            for i in range(d):
                for j in range(d):
                    out[i, j, p] = -a * q[i][j] + b * q2[i][j] - c * norm2 * q[i][j]
                out[i, i, p] -= (b / d) * norm2
    return result


def viscous_stress(double[:, :, ::1] Q, double[:, :, ::1] A, double[:, :, ::1] N,
                   double beta1, double beta5, double beta6, double mu2, double mu1):
    cdef int d = Q.shape[0]
    cdef Py_ssize_t npts = Q.shape[2], p
    cdef int i, j
    cdef double q[3][3]
    cdef double am[3][3]
    cdef double nm[3][3]
    cdef double qa[3][3]
    cdef double aq[3][3]
    cdef double qn[3][3]
    cdef double nq[3][3]
    cdef double qda
    result = np.empty((d, d, npts))
    cdef double[:, :, ::1] out = result
    with nogil:
        for p in range(npts):
            _load(Q, p, d, q)
            _load(A, p, d, am)
            _load(N, p, d, nm)
            _mm(q, am, d, qa)
            _mm(am, q, d, aq)
            _mm(q, nm, d, qn)
            _mm(nm, q, d, nq)
            qda = 0.0
            for i in range(d):
                for j in range(d):
                    qda += q[i][j] * am[j][i]
            for i in range(d):
                for j in range(d):
                    out[i, j, p] = (beta1 * q[i][j] * qda + beta5 * aq[i][j] + beta6 * qa[i][j]
                                    + 0.5 * mu2 * nm[i][j] + mu1 * (qn[i][j] - nq[i][j]))
    return result


def elastic_stress(double[:, :, :, ::1] gQ, double L):
    cdef int d = gQ.shape[0]
    cdef Py_ssize_t npts = gQ.shape[3], p
    cdef int i, j, k, l
    result = np.zeros((d, d, npts))
    cdef double[:, :, ::1] out = result
    # point index innermost so every sweep is contiguous
    with nogil:
        for i in range(d):
            for j in range(i, d):
                for k in range(d):
                    for l in range(d):
                        for p in range(npts):
                            out[i, j, p] += gQ[k, l, i, p] * gQ[k, l, j, p]
                for p in range(npts):
                    out[i, j, p] = -L * out[i, j, p]
                    out[j, i, p] = out[i, j, p]
    return result


def advect(double[:, ::1] v, double[:, :, ::1] gF):
    cdef Py_ssize_t m = gF.shape[0], npts = gF.shape[2], p, a
    cdef int d = v.shape[0], i
    result = np.empty((m, npts))
    cdef double[:, ::1] out = result
    with nogil:
        for a in range(m):
            for p in range(npts):
                out[a, p] = gF[a, 0, p] * v[0, p]
            for i in range(1, d):
                for p in range(npts):
                    out[a, p] += gF[a, i, p] * v[i, p]
    return result


def radial_laplacian(double[::1] f, double[::1] r_center, double[::1] w_center,
                     double[::1] w_face, double h, int d, double f_outer_ghost):
    cdef Py_ssize_t m = f.shape[0], j
    cdef double fl, fr
    result = np.empty(m)
    cdef double[::1] out = result
    with nogil:
        for j in range(m):
            if j == 0:
                fl = 0.0
            else:
                fl = w_face[j] * (f[j] - f[j - 1]) / h
            if j == m - 1:
                fr = w_face[j + 1] * (f_outer_ghost - f[j]) / h
            else:
                fr = w_face[j + 1] * (f[j + 1] - f[j]) / h
            out[j] = (fr - fl) / (h * w_center[j]) - 2.0 * d * f[j] / (r_center[j] * r_center[j])
    return result
