"""Radial melting-hedgehog waves and their lift to full Q-tensor fields.

A twist wave is Q(t, x) = f(t, |x|) H(x) with H the hedgehog tensor and v = 0.
The profile obeys a damped nonlinear radial wave equation, solved here on a
cell-centred grid r_j = (j + 1/2) h so that r = 0 is never a node.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from . import kernels
from . import spectral as sp
from .diagnostics import fmt, twist_constraint_residual
from .dynamics import NonFiniteError, SimState, Stepper
from .params import Coefficients
from .spectral import Grid
from .tensor_algebra import hedgehog_field


class OriginConditionError(ValueError):
    """f or f_r extrapolated to r = 0 is not small."""


class SupportError(ValueError):
    """A radial profile does not fit inside the torus without wrap-around."""


@dataclass(frozen=True)
class RadialGrid:
    R: float
    m: int
    dim: int = 2

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError(f"R must be positive, got {self.R}")
        if self.m < 16:
            raise ValueError(f"m must be >= 16, got {self.m}")
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")

    @property
    def h(self) -> float:
        return self.R / self.m

    @property
    def r(self) -> np.ndarray:
        return (np.arange(self.m) + 0.5) * self.h

    @property
    def r_face(self) -> np.ndarray:
        return np.arange(self.m + 1) * self.h

    def weight(self, kind: str = "paper") -> np.ndarray:
        """Cell average of the radial weight: r^2 as printed, or the volume weight r^(d-1)."""
        if kind == "paper":
            p = 3
        elif kind == "natural":
            p = self.dim
        else:
            raise ValueError(f"unknown weight {kind!r}")
        rf = self.r_face
        return (rf[1:] ** p - rf[:-1] ** p) / (p * self.h)

    def face_weight(self, kind: str = "paper") -> np.ndarray:
        rf = self.r_face
        return rf**2 if kind == "paper" else rf ** (self.dim - 1)


@dataclass
class RadialState:
    t: float
    f: np.ndarray
    ft: np.ndarray

    def copy(self) -> "RadialState":
        return RadialState(self.t, self.f.copy(), self.ft.copy())


def radial_state_from(profile: Callable[[np.ndarray], np.ndarray], rgrid: RadialGrid,
                      velocity: Callable[[np.ndarray], np.ndarray] | None = None) -> RadialState:
    r = rgrid.r
    f = np.asarray(profile(r), dtype=float)
    ft = np.zeros_like(f) if velocity is None else np.asarray(velocity(r), dtype=float)
    return RadialState(0.0, f, ft)


def radial_laplacian(f: np.ndarray, rgrid: RadialGrid) -> np.ndarray:
    """f_rr + (d-1) f_r / r - 2d f / r^2 in flux form, f(R) = 0."""
    return kernels.radial_laplacian(
        f, rgrid.r, rgrid.weight("natural"), rgrid.face_weight("natural"), rgrid.h, rgrid.dim, -f[-1]
    )


def radial_rhs(state: RadialState, coeffs: Coefficients, rgrid: RadialGrid) -> tuple[np.ndarray, np.ndarray]:
    k = coeffs
    d = rgrid.dim
    f = state.f
    force = (
        -k.mu1 * state.ft
        + k.L * radial_laplacian(f, rgrid)
        - k.a * f
        + (k.b * (d - 2) / d) * f * f
        - (k.c * (d - 1) / d) * f**3
    )
    return state.ft.copy(), force / k.J


def radial_cfl_dt(coeffs: Coefficients, rgrid: RadialGrid, safety: float = 0.4) -> float:
    """RK4 step bound from a Gershgorin estimate of the discrete wave operator.

    The -2d/r^2 term makes the first cells the stiffest, so this is tighter
    than the plain wave bound h sqrt(J/L).
    """
    k = coeffs
    h, d, r = rgrid.h, rgrid.dim, rgrid.r
    wc, wf = rgrid.weight("natural"), rgrid.face_weight("natural")
    lam = float(np.max(2.0 * (wf[:-1] + wf[1:]) / (h * h * wc) + 2.0 * d / r**2))
    omega = math.sqrt((k.L * lam + abs(k.a)) / k.J)
    bounds = [2.0 / omega]
    if k.mu1 > 0:
        bounds.append(k.J / k.mu1)
    return safety * min(bounds)


def origin_values(state: RadialState, rgrid: RadialGrid) -> tuple[float, float]:
    """f(0) and f_r(0) from the quadratic through the first three cells."""
    r = rgrid.r[:3]
    p = np.polyfit(r, state.f[:3], 2)
    return float(p[2]), float(p[1])


def origin_check(state: RadialState, rgrid: RadialGrid) -> tuple[float, float]:
    """|f(0)| / max|f| and |f_r(0)| / max|f_r| (0 for a zero profile)."""
    f0, fr0 = origin_values(state, rgrid)
    fmax = float(np.abs(state.f).max())
    fr = np.gradient(state.f, rgrid.h)
    frmax = float(np.abs(fr).max())
    return (abs(f0) / fmax if fmax > 0 else 0.0, abs(fr0) / frmax if frmax > 0 else 0.0)


def radial_step(
    state: RadialState,
    coeffs: Coefficients,
    rgrid: RadialGrid,
    dt: float,
    origin_tol: float | None = None,
) -> RadialState:
    """One RK4 step; with ``origin_tol`` the origin conditions are re-checked afterwards."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")

    def rhs(f, ft):
        return radial_rhs(RadialState(0.0, f, ft), coeffs, rgrid)

    f0, g0 = state.f, state.ft
    a1, b1 = rhs(f0, g0)
    a2, b2 = rhs(f0 + 0.5 * dt * a1, g0 + 0.5 * dt * b1)
    a3, b3 = rhs(f0 + 0.5 * dt * a2, g0 + 0.5 * dt * b2)
    a4, b4 = rhs(f0 + dt * a3, g0 + dt * b3)
    f = f0 + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
    ft = g0 + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
    t = state.t + dt
    if not (np.isfinite(f).all() and np.isfinite(ft).all()):
        raise NonFiniteError(f"non-finite radial profile at t={t}", t)
    out = RadialState(t, f, ft)
    if origin_tol is not None:
        e0, e1 = origin_check(out, rgrid)
        if max(e0, e1) > origin_tol:
            raise OriginConditionError(f"origin conditions violated at t={t}: f(0)~{e0:.3g}, f_r(0)~{e1:.3g}")
    return out


def h_bulk(f: np.ndarray, coeffs: Coefficients, dim: int) -> np.ndarray:
    """Radial bulk density a/2 f^2 - b(d-2)/(3d) f^3 + c(d-1)/(4d) f^4."""
    k = coeffs
    d = dim
    return 0.5 * k.a * f**2 - (k.b * (d - 2) / (3 * d)) * f**3 + (k.c * (d - 1) / (4 * d)) * f**4


def radial_energy(
    state: RadialState, coeffs: Coefficients, rgrid: RadialGrid, weight: str = "paper"
) -> tuple[float, float]:
    """(energy, dissipation rate) of the radial system.

    energy = int (J/2 ft^2 + L/2 f_r^2 + h_B(f) + L d f^2/r^2) w dr and the
    rate is mu1 int ft^2 w dr. f_r lives on faces; the outer face uses the
    Dirichlet ghost and carries half a cell.
    """
    k = coeffs
    d, h, r = rgrid.dim, rgrid.h, rgrid.r
    f, ft = state.f, state.ft
    wc = rgrid.weight(weight)
    wf = rgrid.face_weight(weight)
    fr_int = np.diff(f) / h
    fr_out = -2.0 * f[-1] / h
    grad = h * np.sum(wf[1:-1] * fr_int**2) + 0.5 * h * wf[-1] * fr_out**2
    cells = h * np.sum(wc * (0.5 * k.J * ft**2 + h_bulk(f, k, d) + k.L * d * f**2 / r**2))
    energy = cells + 0.5 * k.L * grad
    dissipation = k.mu1 * h * float(np.sum(wc * ft**2))
    return float(energy), dissipation


def energy_balance_defect(
    s0: RadialState, s1: RadialState, coeffs: Coefficients, rgrid: RadialGrid, weight: str = "paper"
) -> float:
    """E_{n+1} - E_n + dt * (D_n + D_{n+1})/2 for one step."""
    e0, d0 = radial_energy(s0, coeffs, rgrid, weight)
    e1, d1 = radial_energy(s1, coeffs, rgrid, weight)
    return e1 - e0 + (s1.t - s0.t) * 0.5 * (d0 + d1)


def _periodic_offset(grid: Grid, center) -> np.ndarray:
    c = np.asarray(center, dtype=float).reshape((grid.dim,) + (1,) * grid.dim)
    X = grid.x - c
    Lx = grid.domain_length
    return X - Lx * np.round(X / Lx)


def profile_spline(values: np.ndarray, rgrid: RadialGrid) -> Callable[[np.ndarray], np.ndarray]:
    """Cubic spline in r built on the even extension, vanishing for r >= R."""
    r = rgrid.r
    xs = np.concatenate([-r[::-1], r, [rgrid.R]])
    ys = np.concatenate([values[::-1], values, [0.0]])
    spline = CubicSpline(xs, ys, bc_type="not-a-knot")

    def evaluate(rr: np.ndarray) -> np.ndarray:
        out = spline(np.minimum(rr, rgrid.R))
        return np.where(rr >= rgrid.R, 0.0, out)

    return evaluate


def lift_to_tensor(
    state: RadialState, rgrid: RadialGrid, grid: Grid, center=None, tail_tol: float = 1e-12
) -> tuple[np.ndarray, np.ndarray]:
    """Q = f(|x-c|) H(x-c), W = ft(|x-c|) H(x-c) on the torus."""
    if rgrid.dim != grid.dim:
        raise ValueError("radial grid and torus have different dimensions")
    if center is None:
        center = [grid.domain_length / 2.0] * grid.dim
    limit = min(rgrid.R, grid.domain_length / 2.0 - 2.0 * grid.h)
    outside = rgrid.r > limit
    for arr in (state.f, state.ft):
        scale = float(np.abs(arr).max())
        if scale > 0 and outside.any() and float(np.abs(arr[outside]).max()) > tail_tol * scale:
            raise SupportError(f"profile is not supported inside r < {limit:.6g}")
    X = _periodic_offset(grid, center)
    rr = np.sqrt(np.sum(X * X, axis=0))
    H = hedgehog_field(X)
    Q = profile_spline(state.f, rgrid)(rr) * H
    W = profile_spline(state.ft, rgrid)(rr) * H
    return Q, W


def extract_profile(Q: np.ndarray, grid: Grid, r: np.ndarray, center=None) -> np.ndarray:
    """Recover f(r) from T_11 = (1 - 1/d) f along x = c + (r, 0, ...), by spectral interpolation."""
    d = grid.dim
    if center is None:
        center = [grid.domain_length / 2.0] * d
    c = np.asarray(center, dtype=float)
    Qh = sp.to_spectral(grid, Q[0, 0])
    pts = c[:, None] + np.vstack([r] + [np.zeros_like(r)] * (d - 1))
    vals = _spectral_eval(grid, Qh, pts)
    return vals / (1.0 - 1.0 / d)


def _spectral_eval(grid: Grid, fh: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Trigonometric interpolant of a real field at arbitrary points."""
    k = grid.k.reshape(grid.dim, -1)
    w = grid.hermitian_weight.reshape(-1).copy()
    coef = fh.reshape(-1)
    # Nyquist planes of the full axes carry a symmetric cosine, handled by the real part
    phase = np.exp(1j * (k.T @ pts))
    vals = (w[:, None] * (coef[:, None] * phase)).real.sum(axis=0)
    return vals / grid.npoints


@dataclass
class CompareReport:
    times: list = field(default_factory=list)
    l2_discrepancy: list = field(default_factory=list)
    constraint_full: list = field(default_factory=list)
    constraint_radial: list = field(default_factory=list)
    origin_f: list = field(default_factory=list)
    origin_fr: list = field(default_factory=list)
    final_radial: RadialState | None = None
    final_full: SimState | None = None

    @property
    def max_constraint(self) -> float:
        vals = self.constraint_full + self.constraint_radial
        return max(vals) if vals else 0.0

    def rows(self):
        return [(t, e, c) for t, e, c in zip(self.times, self.l2_discrepancy, self.constraint_full)]


def compare_full_vs_radial(
    initial: RadialState,
    coeffs: Coefficients,
    grid: Grid,
    rgrid: RadialGrid,
    T_end: float,
    dt: float,
    sample_every: int = 10,
    center=None,
    allow_3d: bool = False,
) -> CompareReport:
    """Evolve the radial profile and the lifted tensor field (v frozen at 0) side by side."""
    if grid.dim == 3 and not allow_3d:
        raise ValueError("3-d twist-wave comparison needs allow_3d=True (only local existence is known)")
    if grid.dim == 3:
        warnings.warn("3-d twist waves are only known to exist locally in time", stacklevel=2)
    nsteps = int(round(T_end / dt))
    if nsteps < 1 or not math.isclose(nsteps * dt, T_end, rel_tol=1e-9):
        raise ValueError("T_end must be a positive multiple of dt")
    Q0, W0 = lift_to_tensor(initial, rgrid, grid, center)
    full = Stepper(SimState(grid, 0.0, np.zeros((grid.dim,) + grid.shape), Q0, W0), coeffs, freeze_velocity=True)
    rad = initial.copy()
    report = CompareReport()

    def sample():
        st = full.state()
        Qr, Wr = lift_to_tensor(rad, rgrid, grid, center, tail_tol=math.inf)
        report.times.append(rad.t)
        report.l2_discrepancy.append(sp.l2_norm(grid, st.Q - Qr))
        report.constraint_full.append(twist_constraint_residual(grid, st.Q, st.W, coeffs))
        report.constraint_radial.append(twist_constraint_residual(grid, Qr, Wr, coeffs))
        e0, e1 = origin_check(rad, rgrid)
        report.origin_f.append(e0)
        report.origin_fr.append(e1)
        return st

    sample()
    for n in range(1, nsteps + 1):
        rad = radial_step(rad, coeffs, rgrid, dt)
        full.step(dt)
        if n % sample_every == 0 or n == nsteps:
            last = sample()
    report.final_radial = rad
    report.final_full = last
    return report


def write_profile_csv(path, state: RadialState, rgrid: RadialGrid) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("r", "f", "ft"))
        for row in zip(rgrid.r, state.f, state.ft):
            w.writerow([fmt(x) for x in row])


def write_compare_csv(path, report: CompareReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "l2_discrepancy", "constraint_residual"))
        for row in report.rows():
            w.writerow([fmt(x) for x in row])


def bump_profile(amplitude: float = 0.1, width: float = 0.4) -> Callable[[np.ndarray], np.ndarray]:
    """f(r) = A (r/w)^2 exp(-(r/w)^2): even in r, so f(0) = f_r(0) = 0."""

    def f(r):
        s = (np.asarray(r) / width) ** 2
        return amplitude * s * np.exp(-s)

    return f
