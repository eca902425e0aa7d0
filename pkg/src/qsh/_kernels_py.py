"""Pure-numpy pointwise kernels (fallback for the compiled ``_kernels``).

All tensor arguments are flattened to ``(d, d, npts)``, vectors to
``(d, npts)``, gradients of tensors to ``(d, d, d, npts)``; the last tensor
index of a gradient is the derivative direction.
"""

import numpy as np


def _mm(A, B, d):
    out = np.empty_like(A)
    for i in range(d):
        for j in range(d):
            acc = A[i, 0] * B[0, j]
            for k in range(1, d):
                acc = acc + A[i, k] * B[k, j]
            out[i, j] = acc
    return out


def commutator(A, B):
    d = A.shape[0]
    return _mm(A, B, d) - _mm(B, A, d)


def reaction(Q, a, b, c):
    d = Q.shape[0]
    Q2 = _mm(Q, Q, d)
    norm2 = Q2[0, 0].copy()
    for i in range(1, d):
        norm2 += Q2[i, i]
    out = -a * Q + b * Q2 - c * norm2 * Q
    for i in range(d):
        out[i, i] -= (b / d) * norm2
    return out


def viscous_stress(Q, A, N, beta1, beta5, beta6, mu2, mu1):
    d = Q.shape[0]
    QA = _mm(Q, A, d)
    AQ = _mm(A, Q, d)
    # Q:A for symmetric Q
    qa = Q[0, 0] * A[0, 0]
    for i in range(d):
        for j in range(d):
            if i or j:
                qa = qa + Q[i, j] * A[j, i]
    QN = _mm(Q, N, d)
    NQ = _mm(N, Q, d)
    return beta1 * Q * qa + beta5 * AQ + beta6 * QA + (0.5 * mu2) * N + mu1 * (QN - NQ)


def elastic_stress(gQ, L):
    d = gQ.shape[0]
    npts = gQ.shape[-1]
    out = np.empty((d, d, npts))
    for i in range(d):
        for j in range(i, d):
            acc = np.zeros(npts)
            for k in range(d):
                for l in range(d):
                    acc += gQ[k, l, i] * gQ[k, l, j]
            out[i, j] = -L * acc
            if j != i:
                out[j, i] = out[i, j]
    return out


def advect(v, gF):
    """sum_i v_i dF/dx_i for gF of shape (m, d, npts)."""
    d = v.shape[0]
    out = gF[:, 0] * v[0]
    for i in range(1, d):
        out += gF[:, i] * v[i]
    return out


def radial_laplacian(f, r_center, w_center, w_face, h, d, f_outer_ghost):
    """Flux-form r^{1-d} (r^{d-1} f_r)_r on cell centres plus -2d f/r^2.

    ``w_face`` is r^(d-1) on faces and ``w_center`` the cell volume / h, so
    f = r^2 is reproduced exactly. The inner face sits at r = 0 where the
    flux weight vanishes; the outer face uses ``f_outer_ghost``.
    """
    m = f.shape[0]
    flux = np.empty(m + 1)
    flux[0] = 0.0
    flux[1:m] = w_face[1:m] * (f[1:] - f[:-1]) / h
    flux[m] = w_face[m] * (f_outer_ghost - f[m - 1]) / h
    return (flux[1:] - flux[:-1]) / (h * w_center) - 2.0 * d * f / r_center**2
