"""Periodic-torus pseudo-spectral machinery.

Fields are plain numpy arrays whose trailing ``dim`` axes are the grid;
leading axes are components (none for scalars, ``(d,)`` for vectors,
``(d, d)`` for matrices). Spectral arrays use the real-to-complex layout of
``scipy.fft.rfftn`` over the grid axes with the default (unnormalised
forward) convention.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

_workers = max(1, int(os.environ.get("QSH_THREADS", "1") or 1))


def set_threads(n: int) -> None:
    """Worker count for the FFTs; results are reproducible for a fixed count."""
    global _workers
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _workers = int(n)


def get_threads() -> int:
    return _workers


@dataclass(frozen=True)
class Grid:
    dim: int
    n: int
    domain_length: float = 2.0 * math.pi

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.n < 8 or self.n % 2:
            raise ValueError(f"n must be even and >= 8, got {self.n}")
        if not self.domain_length > 0:
            raise ValueError("domain_length must be positive")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.n,) * (self.dim - 1) + (self.n // 2 + 1,)

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    @property
    def h(self) -> float:
        return self.domain_length / self.n

    @property
    def volume(self) -> float:
        return self.domain_length**self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def npoints(self) -> int:
        return self.n**self.dim

    @cached_property
    def x(self) -> np.ndarray:
        """Coordinates, shape (d, *shape)."""
        x1 = np.arange(self.n) * self.h
        return np.array(np.meshgrid(*([x1] * self.dim), indexing="ij"))

    @cached_property
    def index(self) -> np.ndarray:
        """Integer wavenumbers, shape (d, *spectral_shape)."""
        full = np.fft.fftfreq(self.n, 1.0 / self.n)
        half = np.arange(self.n // 2 + 1, dtype=float)
        axes = [full] * (self.dim - 1) + [half]
        return np.array(np.meshgrid(*axes, indexing="ij"))

    @cached_property
    def k(self) -> np.ndarray:
        """Physical wavenumbers 2*pi/domain_length * index."""
        return self.index * (2.0 * math.pi / self.domain_length)

    @cached_property
    def k2(self) -> np.ndarray:
        return np.sum(self.k**2, axis=0)

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def k2_safe(self) -> np.ndarray:
        k2 = self.k2.copy()
        k2.flat[0] = 1.0
        return k2

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3 rule: keep modes with every |index_i| <= n/3."""
        return np.all(np.abs(self.index) <= self.n / 3.0, axis=0).astype(float)

    @cached_property
    def nyquist_free_mask(self) -> np.ndarray:
        """Zero on modes with some |index_i| = n/2, whose sign is ambiguous on an even grid."""
        return np.all(np.abs(self.index) < self.n / 2.0, axis=0).astype(float)

    @cached_property
    def hermitian_weight(self) -> np.ndarray:
        """Multiplicity of each stored rfft mode in the full spectrum."""
        w = np.full(self.spectral_shape, 2.0)
        w[..., 0] = 1.0
        w[..., -1] = 1.0
        return w

    def mollifier_mask(self, n_cut: int | float, dyadic: bool = True) -> np.ndarray:
        """Indicator of |k| <= 2**n_cut (or <= n_cut when ``dyadic`` is false)."""
        cutoff = 2.0**n_cut if dyadic else float(n_cut)
        return (self.kmag <= cutoff * (1.0 + 1e-12)).astype(float)

    def field_axes(self, f: np.ndarray) -> tuple[int, ...]:
        return f.shape[: f.ndim - self.dim]


def to_spectral(grid: Grid, f: np.ndarray) -> np.ndarray:
    return scipy.fft.rfftn(f, axes=grid.axes, workers=_workers)


def to_physical(grid: Grid, fh: np.ndarray) -> np.ndarray:
    return scipy.fft.irfftn(fh, s=grid.shape, axes=grid.axes, workers=_workers)


def _ik(grid: Grid) -> np.ndarray:
    return 1j * grid.k


def gradient_hat(grid: Grid, fh: np.ndarray) -> np.ndarray:
    """Spectral gradient; the derivative index is appended after component indices."""
    comp = fh.ndim - grid.dim
    ik = _ik(grid).reshape((1,) * comp + (grid.dim,) + grid.spectral_shape)
    return np.expand_dims(fh, comp) * ik


def gradient(grid: Grid, f: np.ndarray) -> np.ndarray:
    """grad[..., i, grid] = d/dx_i f[..., grid]."""
    return to_physical(grid, gradient_hat(grid, to_spectral(grid, f)))


def divergence_hat(grid: Grid, Mh: np.ndarray) -> np.ndarray:
    """Contract the last component index with the derivative: (div M)_i = M_ij,j."""
    comp = Mh.ndim - grid.dim
    if comp < 1 or Mh.shape[comp - 1] != grid.dim:
        raise ValueError("divergence needs a trailing component axis of length dim")
    ik = _ik(grid).reshape((1,) * (comp - 1) + (grid.dim,) + grid.spectral_shape)
    return np.sum(Mh * ik, axis=comp - 1)


def divergence(grid: Grid, M: np.ndarray) -> np.ndarray:
    return to_physical(grid, divergence_hat(grid, to_spectral(grid, M)))


def laplacian_hat(grid: Grid, fh: np.ndarray) -> np.ndarray:
    return -grid.k2 * fh


def laplacian(grid: Grid, f: np.ndarray) -> np.ndarray:
    return to_physical(grid, laplacian_hat(grid, to_spectral(grid, f)))


def leray_project_hat(grid: Grid, vh: np.ndarray) -> np.ndarray:
    """v_hat - k (k . v_hat)/|k|^2 for k != 0; the mean mode is untouched.

    Nyquist modes are dropped: +n/2 and -n/2 share one coefficient, so the
    projector there is not Hermitian and the result would not be real.
    """
    k = grid.k
    kdotv = np.sum(k * vh, axis=0)
    return (vh - k * (kdotv / grid.k2_safe)) * grid.nyquist_free_mask


def leray_project(grid: Grid, v: np.ndarray) -> np.ndarray:
    return to_physical(grid, leray_project_hat(grid, to_spectral(grid, v)))


def mollify(grid: Grid, f: np.ndarray, n_cut: int | float, dyadic: bool = True) -> np.ndarray:
    """Friedrichs cutoff: drop every mode with |k| > 2**n_cut; the mean is kept."""
    mask = grid.mollifier_mask(n_cut, dyadic)
    return to_physical(grid, to_spectral(grid, f) * mask)


def dealias(grid: Grid, f: np.ndarray) -> np.ndarray:
    return to_physical(grid, to_spectral(grid, f) * grid.dealias_mask)


def sobolev_norm_hat(grid: Grid, fh: np.ndarray, s: float) -> float:
    if s < 0:
        raise ValueError(f"Sobolev index must be >= 0, got {s}")
    # s = 0 is the plain L2 norm (no homogeneous part)
    weight = grid.hermitian_weight * (1.0 + grid.k2**s) if s > 0 else grid.hermitian_weight
    total = np.sum(weight * (fh.real**2 + fh.imag**2))
    return math.sqrt(total * grid.volume) / grid.npoints


def sobolev_norm(grid: Grid, f: np.ndarray, s: float) -> float:
    """sqrt(sum_k (1 + |k|^{2s}) |f_k|^2) with Parseval scaling.

    At s = 0 the weight is 1, so the result equals the physical L2 norm.
    """
    return sobolev_norm_hat(grid, to_spectral(grid, f), s)


def l2_norm(grid: Grid, f: np.ndarray) -> float:
    return math.sqrt(grid.cell_volume * float(np.sum(f * f)))


def inner_product_l2(grid: Grid, f: np.ndarray, g: np.ndarray) -> float:
    """Uniform-grid quadrature of sum over components of f*g."""
    if f.shape != g.shape:
        raise ValueError(f"shape mismatch {f.shape} vs {g.shape}")
    return grid.cell_volume * float(np.sum(f * g))


def band_limited_random(grid: Grid, rng: np.random.Generator, components: tuple[int, ...], kmax: float) -> np.ndarray:
    """Random real field with modes restricted to every |index_i| <= kmax."""
    shape = components + grid.shape
    f = rng.standard_normal(shape)
    mask = np.all(np.abs(grid.index) <= kmax, axis=0)
    return to_physical(grid, to_spectral(grid, f) * mask)
