"""Right-hand sides and time stepping for the coupled (v, Q, W) system.

W is the material derivative of Q. The pressure never appears: every
momentum tendency is Leray-projected. All products are formed on the grid
and truncated by a spectral mask (the 2/3 rule, optionally intersected with
the Friedrichs cutoff).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from . import spectral as sp
from .params import Coefficients
from .spectral import Grid
from .tensor_algebra import frobenius_sq


class NonFiniteError(FloatingPointError):
    """A field became NaN/Inf during a step (blow-up or CFL violation)."""

    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t


@dataclass
class SimState:
    grid: Grid
    t: float
    v: np.ndarray
    Q: np.ndarray
    W: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid, t: float = 0.0) -> "SimState":
        d = grid.dim
        return cls(
            grid,
            t,
            np.zeros((d,) + grid.shape),
            np.zeros((d, d) + grid.shape),
            np.zeros((d, d) + grid.shape),
        )

    def copy(self) -> "SimState":
        return SimState(self.grid, self.t, self.v.copy(), self.Q.copy(), self.W.copy())

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.v).all() and np.isfinite(self.Q).all() and np.isfinite(self.W).all())


@dataclass
class Tendencies:
    dv_dt: np.ndarray
    dQ_dt: np.ndarray
    dW_dt: np.ndarray


def _sym_traceless_hat(Mh: np.ndarray) -> np.ndarray:
    d = Mh.shape[0]
    sym = 0.5 * (Mh + np.swapaxes(Mh, 0, 1))
    tr = np.einsum("ii...->...", Mh) / d
    for i in range(d):
        sym[i, i] -= tr
    return sym


def strain_rotation(grid: Grid, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric and skew parts of grad v, with (grad v)_ij = dv_i/dx_j."""
    gv = sp.gradient(grid, v)
    gvT = np.swapaxes(gv, 0, 1)
    return 0.5 * (gv + gvT), 0.5 * (gv - gvT)


def corotational_flux(Q: np.ndarray, W: np.ndarray, Omega: np.ndarray) -> np.ndarray:
    """N = W - [Omega, Q]."""
    return W - kernels.commutator(Omega, Q)


def elastic_stress(grid: Grid, Q: np.ndarray, coeffs: Coefficients, mask: np.ndarray | None = None) -> np.ndarray:
    """-L (grad Q (.) grad Q), truncated by ``mask`` (2/3 rule by default)."""
    mask = grid.dealias_mask if mask is None else mask
    gQ = sp.gradient(grid, Q)
    return sp.to_physical(grid, sp.to_spectral(grid, kernels.elastic_stress(gQ, coeffs.L)) * mask)


def viscous_stress(
    grid: Grid,
    Q: np.ndarray,
    A: np.ndarray,
    Omega: np.ndarray,
    W: np.ndarray,
    coeffs: Coefficients,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """Non-Newtonian part of the viscous stress (the beta4 term is handled as a Laplacian)."""
    mask = grid.dealias_mask if mask is None else mask
    k = coeffs
    N = corotational_flux(Q, W, Omega)
    sigma = kernels.viscous_stress(Q, A, N, k.beta1, k.beta5, k.beta6, k.mu2, k.mu1)
    return sp.to_physical(grid, sp.to_spectral(grid, sigma) * mask)


class RHS:
    """Spectral right-hand side of the first-order system.

    ``mask`` truncates every nonlinear product and the tendencies; with
    ``linear_split`` the stiff linear terms (viscosity, elasticity, damping
    and the a-term) are left out for use with an integrating factor.
    """

    def __init__(
        self,
        grid: Grid,
        coeffs: Coefficients,
        mask: np.ndarray | None = None,
        freeze_velocity: bool = False,
        linear_split: bool = False,
    ):
        if not coeffs.J > 0:
            raise ValueError(f"inertial density J must be positive, got {coeffs.J}")
        if coeffs.dim != grid.dim:
            raise ValueError(f"coefficients are for dim={coeffs.dim}, grid has dim={grid.dim}")
        self.grid = grid
        self.coeffs = coeffs
        self.mask = grid.dealias_mask if mask is None else mask
        self.freeze_velocity = freeze_velocity
        self.linear_split = linear_split
        self._ik = 1j * grid.k

    def __call__(self, vh: np.ndarray, Qh: np.ndarray, Wh: np.ndarray):
        grid, k, mask = self.grid, self.coeffs, self.mask
        d = grid.dim
        spec = grid.spectral_shape
        ik = self._ik
        gQh = Qh[:, :, None] * ik[None, None]
        if self.freeze_velocity:
            blocks = [Qh.reshape((-1,) + spec), gQh.reshape((-1,) + spec)]
        else:
            gvh = vh[:, None] * ik[None]
            gWh = Wh[:, :, None] * ik[None, None]
            blocks = [
                Qh.reshape((-1,) + spec),
                gQh.reshape((-1,) + spec),
                vh,
                gvh.reshape((-1,) + spec),
                Wh.reshape((-1,) + spec),
                gWh.reshape((-1,) + spec),
            ]
        phys = sp.to_physical(grid, np.concatenate(blocks))
        shape = grid.shape
        d2, d3 = d * d, d * d * d
        Q = phys[:d2].reshape((d, d) + shape)
        gQ = phys[d2 : d2 + d3].reshape((d, d, d) + shape)
        R = kernels.reaction(Q, k.a, k.b, k.c)

        if self.freeze_velocity:
            out = sp.to_spectral(grid, R) * mask
            Rh = out
            dvh = np.zeros_like(vh)
            dQh = np.zeros_like(Wh) if self.linear_split else Wh.copy()
            if self.linear_split:
                dWh = (Rh + k.a * Qh * mask) / k.J
            else:
                dWh = (-k.mu1 * Wh - k.L * grid.k2 * Qh + Rh) / k.J
            return dvh, _sym_traceless_hat(dQh) * mask, _sym_traceless_hat(dWh) * mask

        off = d2 + d3
        v = phys[off : off + d]
        off += d
        gv = phys[off : off + d2].reshape((d, d) + shape)
        off += d2
        W = phys[off : off + d2].reshape((d, d) + shape)
        off += d2
        gW = phys[off : off + d3].reshape((d, d, d) + shape)

        gvT = np.swapaxes(gv, 0, 1)
        A = 0.5 * (gv + gvT)
        Om = 0.5 * (gv - gvT)
        comm = kernels.commutator(Om, Q)
        N = W - comm
        sigma = kernels.elastic_stress(gQ, k.L) + kernels.viscous_stress(
            Q, A, N, k.beta1, k.beta5, k.beta6, k.mu2, k.mu1
        )
        adv_v = kernels.advect(v, gv)
        adv_Q = kernels.advect(v, gQ)
        adv_W = kernels.advect(v, gW)

        prods = np.concatenate(
            [
                adv_v,
                sigma.reshape((-1,) + shape),
                adv_Q.reshape((-1,) + shape),
                adv_W.reshape((-1,) + shape),
                R.reshape((-1,) + shape),
                comm.reshape((-1,) + shape),
            ]
        )
        ph = sp.to_spectral(grid, prods) * mask
        adv_vh = ph[:d]
        off = d
        sigh = ph[off : off + d2].reshape((d, d) + spec)
        off += d2
        adv_Qh = ph[off : off + d2].reshape((d, d) + spec)
        off += d2
        adv_Wh = ph[off : off + d2].reshape((d, d) + spec)
        off += d2
        Rh = ph[off : off + d2].reshape((d, d) + spec)
        off += d2
        commh = ph[off : off + d2].reshape((d, d) + spec)

        force = -adv_vh + sp.divergence_hat(grid, sigh)
        if not self.linear_split:
            force = force - (0.5 * k.beta4) * grid.k2 * vh
        dvh = sp.leray_project_hat(grid, force) * mask

        Ah = 0.5 * (gvh + np.swapaxes(gvh, 0, 1))
        dQh = -adv_Qh if self.linear_split else Wh - adv_Qh
        forcing = Rh + (0.5 * k.mu2_tilde) * Ah + k.mu1 * commh
        if self.linear_split:
            dWh = -adv_Wh + (forcing + k.a * Qh) / k.J
        else:
            dWh = -adv_Wh + (forcing - k.mu1 * Wh - k.L * grid.k2 * Qh) / k.J
        return dvh, _sym_traceless_hat(dQh) * mask, _sym_traceless_hat(dWh) * mask


def to_spectral_state(state: SimState):
    g = state.grid
    return sp.to_spectral(g, state.v), sp.to_spectral(g, state.Q), sp.to_spectral(g, state.W)


def from_spectral_state(grid: Grid, t: float, vh, Qh, Wh) -> SimState:
    return SimState(grid, t, sp.to_physical(grid, vh), sp.to_physical(grid, Qh), sp.to_physical(grid, Wh))


def tendencies(state: SimState, coeffs: Coefficients, freeze_velocity: bool = False) -> Tendencies:
    rhs = RHS(state.grid, coeffs, freeze_velocity=freeze_velocity)
    dvh, dQh, dWh = rhs(*to_spectral_state(state))
    g = state.grid
    return Tendencies(sp.to_physical(g, dvh), sp.to_physical(g, dQh), sp.to_physical(g, dWh))


def momentum_rhs(state: SimState, coeffs: Coefficients) -> np.ndarray:
    """P(-(v.grad)v + beta4/2 lap v + div(elastic + viscous stress))."""
    return tendencies(state, coeffs).dv_dt


def qtensor_rhs(state: SimState, coeffs: Coefficients) -> tuple[np.ndarray, np.ndarray]:
    t = tendencies(state, coeffs)
    return t.dQ_dt, t.dW_dt


def _finalize(grid: Grid, mask: np.ndarray, vh, Qh, Wh):
    vh = sp.leray_project_hat(grid, vh) * mask
    return vh, _sym_traceless_hat(Qh) * mask, _sym_traceless_hat(Wh) * mask


class Stepper:
    """Classical RK4 (or Lawson integrating-factor RK4) on spectral state.

    Keeping the state spectral across steps avoids two transforms per
    step; ``state()`` converts back on demand.
    """

    def __init__(
        self,
        state: SimState,
        coeffs: Coefficients,
        n_cut: int | float | None = None,
        freeze_velocity: bool = False,
        method: str = "rk4",
    ):
        grid = state.grid
        mask = grid.dealias_mask
        if n_cut is not None:
            mask = mask * grid.mollifier_mask(n_cut)
        if method not in ("rk4", "ifrk4"):
            raise ValueError(f"unknown integrator {method!r}")
        self.grid = grid
        self.coeffs = coeffs
        self.mask = mask
        self.method = method
        self.freeze_velocity = freeze_velocity
        self.rhs = RHS(grid, coeffs, mask, freeze_velocity, linear_split=(method == "ifrk4"))
        self.t = state.t
        vh, Qh, Wh = to_spectral_state(state)
        if freeze_velocity:
            vh = np.zeros_like(vh)
        self.y = (vh, Qh, Wh)
        self._if_cache: dict[float, tuple] = {}

    def state(self) -> SimState:
        return from_spectral_state(self.grid, self.t, *self.y)

    def _check(self, y):
        for arr in y:
            if not np.isfinite(arr).all():
                raise NonFiniteError(f"non-finite field after step ending at t={self.t}", self.t)

    def step(self, dt: float) -> None:
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        y = self._rk4(dt) if self.method == "rk4" else self._ifrk4(dt)
        y = _finalize(self.grid, self.mask, *y)
        self.t = self.t + dt
        self._check(y)
        self.y = y

    def _rk4(self, dt):
        f = self.rhs
        y0 = self.y
        k1 = f(*y0)
        k2 = f(*(a + 0.5 * dt * b for a, b in zip(y0, k1)))
        k3 = f(*(a + 0.5 * dt * b for a, b in zip(y0, k2)))
        k4 = f(*(a + dt * b for a, b in zip(y0, k3)))
        return tuple(
            a + (dt / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4) for a, b1, b2, b3, b4 in zip(y0, k1, k2, k3, k4)
        )

    # integrating factor ---------------------------------------------------
    def _propagators(self, tau: float):
        key = float(tau)
        if key not in self._if_cache:
            k = self.coeffs
            g = self.grid
            ev = np.exp(-0.5 * k.beta4 * g.k2 * tau)
            omega2 = (k.L * g.k2 + k.a) / k.J
            gamma = k.mu1 / k.J
            s2 = 0.25 * gamma**2 - omega2
            s = np.sqrt(np.abs(s2))
            half = 0.5 * gamma
            with np.errstate(over="ignore", invalid="ignore"):
                real = s2 > 0
                ep = np.exp((s - half) * tau)
                em = np.exp(-(s + half) * tau)
                damp = np.exp(-half * tau)
                C = np.where(real, 0.5 * (ep + em), damp * np.cos(s * tau))
                small = s * tau < 1e-8
                s_safe = np.where(small, 1.0, s)
                S = np.where(real, (ep - em) / (2.0 * s_safe), damp * np.sin(s * tau) / s_safe)
                S = np.where(small, damp * tau, S)
            E = (C + half * S, S, -omega2 * S, C - half * S)
            self._if_cache[key] = (ev, E)
        return self._if_cache[key]

    def _apply(self, tau, y):
        ev, (e11, e12, e21, e22) = self._propagators(tau)
        vh, Qh, Wh = y
        return (ev * vh, e11 * Qh + e12 * Wh, e21 * Qh + e22 * Wh)

    def _ifrk4(self, dt):
        # Lawson RK4 with E(t) = exp(t * linear part)
        f = self.rhs
        y0 = self.y
        half = 0.5 * dt

        def axpy(x, a, z):
            return tuple(xi + a * zi for xi, zi in zip(x, z))

        ey0_h = self._apply(half, y0)
        k1 = f(*y0)
        k2 = f(*self._apply(half, axpy(y0, half, k1)))
        k3 = f(*axpy(ey0_h, half, k2))
        k4 = f(*axpy(self._apply(dt, y0), dt, self._apply(half, k3)))
        out = axpy(self._apply(dt, y0), dt / 6.0, self._apply(dt, k1))
        out = axpy(out, dt / 3.0, self._apply(half, tuple(a + b for a, b in zip(k2, k3))))
        return axpy(out, dt / 6.0, k4)


def step_rk4(state: SimState, coeffs: Coefficients, dt: float, freeze_velocity: bool = False) -> SimState:
    st = Stepper(state, coeffs, freeze_velocity=freeze_velocity)
    st.step(dt)
    return st.state()


def step_mollified(state: SimState, coeffs: Coefficients, dt: float, n_cut: int | float) -> SimState:
    """RK4 step of the Friedrichs-truncated system: every product is cut at |k| <= 2**n_cut."""
    st = Stepper(state, coeffs, n_cut=n_cut)
    st.step(dt)
    return st.state()


def step_ifrk4(state: SimState, coeffs: Coefficients, dt: float, freeze_velocity: bool = False) -> SimState:
    st = Stepper(state, coeffs, freeze_velocity=freeze_velocity, method="ifrk4")
    st.step(dt)
    return st.state()


def _max_norm_Q(Q: np.ndarray) -> float:
    return float(np.sqrt(frobenius_sq(Q).max())) if Q.size else 0.0


def cfl_dt(state: SimState, coeffs: Coefficients, safety: float = 0.4) -> float:
    """Explicit-RK4 step bound from viscous, advective, wave and reaction time scales."""
    k = coeffs
    h = state.grid.h
    vmax = float(np.sqrt(np.sum(state.v**2, axis=0)).max())
    qmax = _max_norm_Q(state.Q)
    bounds = [h / math.sqrt(k.L / k.J)]
    if k.beta4 > 0:
        bounds.append(h * h / k.beta4)
    if vmax > 0:
        bounds.append(h / vmax)
    rate = k.mu1 / k.J + abs(k.a) + abs(k.b) * qmax + k.c * qmax**2
    if rate > 0:
        bounds.append(1.0 / rate)
    return safety * min(bounds)


def cfl_dt_integrating_factor(
    state: SimState, coeffs: Coefficients, safety: float = 0.4, dt_max: float = 0.05
) -> float:
    """Step bound once the stiff linear terms are integrated exactly.

    Only advection, the bulk nonlinearity and the velocity/tensor cross
    couplings remain explicit; ``dt_max`` caps the step for accuracy.
    """
    k = coeffs
    h = state.grid.h
    vmax = float(np.sqrt(np.sum(state.v**2, axis=0)).max())
    qmax = _max_norm_Q(state.Q)
    bounds = [dt_max / safety]
    if vmax > 0:
        bounds.append(h / vmax)
    rate = abs(k.b) * qmax + k.c * qmax**2
    coupling = math.sqrt((abs(k.mu2_tilde) + abs(k.mu2) + 2.0 * k.mu1 * qmax) ** 2 / k.J) / h
    rate += coupling
    if rate > 0:
        bounds.append(1.0 / rate)
    return safety * min(bounds)
