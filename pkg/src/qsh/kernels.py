"""Backend selection for the pointwise kernels.

The compiled extension is used when importable; ``QSH_BACKEND=python``
forces the numpy fallback. Field-shaped wrappers flatten the grid axes so
both backends see contiguous ``(..., npts)`` arrays.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

_requested = os.environ.get("QSH_BACKEND", "auto").strip().lower()

if _requested == "python":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        _impl = _kernels_py
        BACKEND = "python"


def use_backend(name: str) -> None:
    """Switch backends at runtime (used by the benchmark and backend tests)."""
    global _impl, BACKEND
    if name == "python":
        _impl, BACKEND = _kernels_py, "python"
    elif name == "cython":
        from . import _kernels  # type: ignore[attr-defined]

        _impl, BACKEND = _kernels, "cython"
    else:
        raise ValueError(f"unknown backend {name!r}")


def compiled_available() -> bool:
    try:
        from . import _kernels  # noqa: F401  # type: ignore[attr-defined]
    except ImportError:
        return False
    return True


def _flat(x: np.ndarray, lead: int) -> np.ndarray:
    return np.ascontiguousarray(x.reshape(x.shape[:lead] + (-1,)), dtype=float)


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    grid_shape = A.shape[2:]
    return _impl.commutator(_flat(A, 2), _flat(B, 2)).reshape(A.shape[:2] + grid_shape)


def reaction(Q: np.ndarray, a: float, b: float, c: float) -> np.ndarray:
    return _impl.reaction(_flat(Q, 2), a, b, c).reshape(Q.shape)


def viscous_stress(Q, A, N, beta1, beta5, beta6, mu2, mu1) -> np.ndarray:
    out = _impl.viscous_stress(_flat(Q, 2), _flat(A, 2), _flat(N, 2), beta1, beta5, beta6, mu2, mu1)
    return out.reshape(Q.shape)


def elastic_stress(gQ: np.ndarray, L: float) -> np.ndarray:
    d = gQ.shape[0]
    return _impl.elastic_stress(_flat(gQ, 3), L).reshape((d, d) + gQ.shape[3:])


def advect(v: np.ndarray, gF: np.ndarray) -> np.ndarray:
    """v . grad F for gF shaped (*comp, d, *grid)."""
    d = v.shape[0]
    grid_shape = v.shape[1:]
    comp = gF.shape[: gF.ndim - len(grid_shape) - 1]
    gflat = np.ascontiguousarray(gF.reshape((-1, d, int(np.prod(grid_shape)))), dtype=float)
    out = _impl.advect(_flat(v, 1), gflat)
    return out.reshape(comp + grid_shape)


def radial_laplacian(f, r_center, w_center, w_face, h, d, f_outer_ghost) -> np.ndarray:
    def c(x):
        return np.ascontiguousarray(x, dtype=float)

    return _impl.radial_laplacian(c(f), c(r_center), c(w_center), c(w_face), float(h), int(d), float(f_outer_ghost))
