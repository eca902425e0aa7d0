"""Pointwise algebra of symmetric traceless d x d tensors.

Every function accepts either a single matrix of shape ``(d, d)`` or a
field of matrices of shape ``(d, d, *grid)``; the two leading axes are the
tensor indices.
"""

from __future__ import annotations

import numpy as np

from .params import Coefficients


def _eye(d: int, like: np.ndarray) -> np.ndarray:
    eye = np.eye(d)
    return eye.reshape((d, d) + (1,) * (like.ndim - 2))


def transpose(M: np.ndarray) -> np.ndarray:
    return np.swapaxes(M, 0, 1)


def trace(M: np.ndarray) -> np.ndarray:
    return np.einsum("ii...->...", M)


def matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.einsum("ik...,kj...->ij...", A, B)


def project_symmetric_traceless(M: np.ndarray) -> np.ndarray:
    """(M + M^T)/2 - tr(M)/d I."""
    M = np.asarray(M, dtype=float)
    d = M.shape[0]
    sym = 0.5 * (M + transpose(M))
    return sym - (trace(M) / d) * _eye(d, M)


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    return matmul(A, B) - matmul(B, A)


def double_contract(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """A:B = tr(AB) = sum_ij A_ij B_ji."""
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    return np.einsum("ij...,ji...->...", A, B)


def frobenius_sq(Q: np.ndarray) -> np.ndarray:
    return np.einsum("ij...,ij...->...", Q, Q)


def bulk_potential(Q: np.ndarray, coeffs: Coefficients) -> np.ndarray:
    """Landau-de Gennes bulk density a/2 tr Q^2 - b/3 tr Q^3 + c/4 (tr Q^2)^2."""
    Q = np.asarray(Q, dtype=float)
    Q2 = matmul(Q, Q)
    tr2 = trace(Q2)
    out = 0.5 * coeffs.a * tr2 + 0.25 * coeffs.c * tr2**2
    # tr Q^3 vanishes identically for traceless 2x2 tensors; skip the rounding noise
    if Q.shape[0] == 3:
        out = out - coeffs.b / 3.0 * np.einsum("ij...,ji...->...", Q2, Q)
    return out


def bulk_gradient(Q: np.ndarray, coeffs: Coefficients) -> np.ndarray:
    """Unconstrained derivative of bulk_potential: aQ - bQ^2 + c|Q|^2 Q."""
    Q = np.asarray(Q, dtype=float)
    return coeffs.a * Q - coeffs.b * matmul(Q, Q) + coeffs.c * frobenius_sq(Q) * Q


def reaction_term(Q: np.ndarray, coeffs: Coefficients) -> np.ndarray:
    """-aQ + b(Q^2 - |Q|^2/d I) - cQ|Q|^2.

    The b-term carries the Lagrange-multiplier correction explicitly, so the
    result is traceless without a post-hoc projection.
    """
    Q = np.asarray(Q, dtype=float)
    d = Q.shape[0]
    norm2 = frobenius_sq(Q)
    Q2 = matmul(Q, Q)
    return -coeffs.a * Q + coeffs.b * (Q2 - (norm2 / d) * _eye(d, Q)) - coeffs.c * norm2 * Q


def hedgehog(x, dim: int | None = None) -> np.ndarray:
    """x x^T / |x|^2 - I/d for a nonzero d-vector x."""
    x = np.asarray(x, dtype=float)
    d = x.shape[0] if dim is None else dim
    if x.shape[0] != d:
        raise ValueError(f"vector of length {x.shape[0]} given for dim={d}")
    r2 = float(np.dot(x, x))
    if r2 == 0.0:
        raise ValueError("hedgehog is singular at x = 0")
    return np.outer(x, x) / r2 - np.eye(d) / d


def hedgehog_field(X: np.ndarray) -> np.ndarray:
    """Hedgehog tensor on a coordinate array X of shape (d, *grid); zero where X = 0."""
    d = X.shape[0]
    r2 = np.einsum("i...,i...->...", X, X)
    safe = np.where(r2 > 0, r2, 1.0)
    H = np.einsum("i...,j...->ij...", X, X) / safe - _eye(d, X[None]) / d
    return np.where(r2 > 0, H, 0.0)
