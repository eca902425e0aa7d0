"""Energy functionals, dissipation, energy-law residuals and monitors.

All integrals use the uniform-grid quadrature, which is exact for the
band-limited products produced by the dealiased solver.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from . import spectral as sp
from .dynamics import SimState, tendencies
from .params import Coefficients
from .spectral import Grid
from .tensor_algebra import bulk_gradient, bulk_potential, double_contract, frobenius_sq, matmul, trace

ENERGY_CSV_HEADER = (
    "t",
    "kinetic",
    "rotational",
    "elastic",
    "bulk",
    "total",
    "diss_newtonian",
    "diss_beta1",
    "diss_rotational",
    "cross_mu2tilde",
    "cross_mu2",
    "constraint_residual",
)


def _integrate(grid: Grid, f: np.ndarray) -> float:
    return grid.cell_volume * float(np.sum(f))


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    rotational: float
    elastic: float
    bulk: float
    total: float
    dissipation_newtonian: float
    dissipation_beta1: float
    dissipation_rotational: float
    cross_mu2tilde: float
    cross_mu2: float
    # full right-hand side of the energy identity for arbitrary coefficients;
    # equals cross_mu2tilde + cross_mu2 under the energy-decay relations
    law_rhs: float

    @property
    def dissipation(self) -> float:
        return self.dissipation_newtonian + self.dissipation_beta1 + self.dissipation_rotational


def energy_breakdown(state: SimState, coeffs: Coefficients, elastic_factor: float = 0.5) -> EnergyBreakdown:
    """E = 1/2|v|^2 + J/2|W|^2 + elastic_factor*L|grad Q|^2 + psi_B(Q), plus dissipation.

    ``elastic_factor=0.25`` gives the alternative normalisation; only 0.5 is
    consistent with the evolution equations.
    """
    g = state.grid
    k = coeffs
    v, Q, W = state.v, state.Q, state.W
    gv = sp.gradient(g, v)
    gQ = sp.gradient(g, Q)
    A = 0.5 * (gv + np.swapaxes(gv, 0, 1))
    Om = 0.5 * (gv - np.swapaxes(gv, 0, 1))
    comm = kernels.commutator(Om, Q)
    N = W - comm

    kinetic = 0.5 * _integrate(g, v * v)
    rotational = 0.5 * k.J * _integrate(g, W * W)
    elastic = elastic_factor * k.L * _integrate(g, gQ * gQ)
    bulk = _integrate(g, bulk_potential(Q, k))
    total = kinetic + rotational + elastic + bulk

    qa = double_contract(Q, A)
    WA = _integrate(g, double_contract(W, A))
    AcommQ = _integrate(g, double_contract(A, comm))
    AQA = _integrate(g, trace(matmul(A, matmul(Q, A))))
    rhs = 0.5 * (k.mu2_tilde - k.mu2) * WA - (k.beta5 + k.beta6) * AQA + 0.5 * (k.beta6 - k.beta5 + k.mu2) * AcommQ
    return EnergyBreakdown(
        kinetic=kinetic,
        rotational=rotational,
        elastic=elastic,
        bulk=bulk,
        total=total,
        dissipation_newtonian=0.5 * k.beta4 * _integrate(g, gv * gv),
        dissipation_beta1=k.beta1 * _integrate(g, qa * qa),
        dissipation_rotational=k.mu1 * _integrate(g, N * N),
        cross_mu2tilde=k.mu2_tilde * WA,
        cross_mu2=k.mu2 * AcommQ,
        law_rhs=rhs,
    )


def energy_rate(state: SimState, coeffs: Coefficients) -> float:
    """Exact semi-discrete dE/dt along the solver's own tendencies."""
    g = state.grid
    k = coeffs
    td = tendencies(state, coeffs)
    # W is the material derivative, so dQ/dt here is the partial derivative
    gQ = sp.gradient(g, state.Q)
    gdQ = sp.gradient(g, td.dQ_dt)
    return (
        _integrate(g, state.v * td.dv_dt)
        + k.J * _integrate(g, state.W * td.dW_dt)
        + k.L * _integrate(g, gQ * gdQ)
        + _integrate(g, double_contract(bulk_gradient(state.Q, k), td.dQ_dt))
    )


def energy_law_residual(
    history: Sequence[tuple[SimState, EnergyBreakdown]], coeffs: Coefficients | None = None
) -> np.ndarray:
    """r_n = (E_{n+1} - E_{n-1})/(2 dt) + D_n - RHS_n at interior samples.

    ``coeffs`` is accepted for symmetry with the other diagnostics; the
    breakdowns already carry the coefficient-weighted terms.
    """
    if len(history) < 3:
        raise ValueError("energy_law_residual needs at least 3 samples")
    times = np.array([s.t for s, _ in history])
    steps = np.diff(times)
    dt = float(steps.mean())
    if not np.allclose(steps, dt, rtol=1e-9, atol=0.0):
        raise ValueError("energy_law_residual needs a uniform time step")
    E = np.array([eb.total for _, eb in history])
    D = np.array([eb.dissipation for _, eb in history])
    R = np.array([eb.law_rhs for _, eb in history])
    return (E[2:] - E[:-2]) / (2.0 * dt) + D[1:-1] - R[1:-1]


@dataclass(frozen=True)
class SecondEnergyTerms:
    # integrand of the time derivative: J|W+Q|^2 - J|W|^2 + (mu1-J)|Q|^2
    functional: float
    inertial_power: float  # J |W|^2
    elastic_power: float  # L |grad Q|^2
    bulk_power: float  # P(Q) = int(-a Q:Q + b tr Q^3 - c |Q|^4)
    strain_coupling: float  # mu2_tilde/2 int tr(AQ)


def second_energy_terms(state: SimState, coeffs: Coefficients) -> SecondEnergyTerms:
    g = state.grid
    k = coeffs
    Q, W = state.Q, state.W
    A, _ = _strain(g, state.v)
    q2 = frobenius_sq(Q)
    trq3 = trace(matmul(Q, matmul(Q, Q)))
    gQ = sp.gradient(g, Q)
    return SecondEnergyTerms(
        functional=_integrate(g, k.J * frobenius_sq(W + Q) - k.J * frobenius_sq(W) + (k.mu1 - k.J) * q2),
        inertial_power=k.J * _integrate(g, frobenius_sq(W)),
        elastic_power=k.L * _integrate(g, gQ * gQ),
        bulk_power=_integrate(g, -k.a * q2 + k.b * trq3 - k.c * q2 * q2),
        strain_coupling=0.5 * k.mu2_tilde * _integrate(g, trace(matmul(A, Q))),
    )


def _strain(grid: Grid, v: np.ndarray):
    gv = sp.gradient(grid, v)
    gvT = np.swapaxes(gv, 0, 1)
    return 0.5 * (gv + gvT), 0.5 * (gv - gvT)


@dataclass(frozen=True)
class LyapunovMonitor:
    phi: float
    psi: float
    s: float


def lyapunov_monitor(state: SimState, s: float = 2.0) -> LyapunovMonitor:
    """Phi = |v|^2 + |Q|^2 + |W|^2 + |grad Q|^2 and Psi = |grad v|^2 + |W|^2 + |Q|^2 + |grad Q|^2 in H^s."""
    g = state.grid
    if s <= g.dim / 2:
        warnings.warn(f"Sobolev index s={s} <= d/2; H^s is not an algebra here", stacklevel=2)
    vh = sp.to_spectral(g, state.v)
    Qh = sp.to_spectral(g, state.Q)
    Wh = sp.to_spectral(g, state.W)

    def n2(fh):
        return sp.sobolev_norm_hat(g, fh, s) ** 2

    q, w = n2(Qh), n2(Wh)
    gq = n2(sp.gradient_hat(g, Qh))
    return LyapunovMonitor(
        phi=n2(vh) + q + w + gq,
        psi=n2(sp.gradient_hat(g, vh)) + w + q + gq,
        s=s,
    )


def coercivity_witness(Q: np.ndarray, coeffs: Coefficients, mu1_bar: float) -> float:
    """min over grid points of mu1_bar |Q|^2 + 4 psi_B(Q)."""
    return float(np.min(mu1_bar * frobenius_sq(Q) + 4.0 * bulk_potential(Q, coeffs)))


def twist_forcing(grid: Grid, Q: np.ndarray, W: np.ndarray, coeffs: Coefficients) -> np.ndarray:
    """div(-grad Q (x) grad Q + mu2/2 W + mu1 [Q, W]) with v = 0."""
    gQ = sp.gradient(grid, Q)
    stress = kernels.elastic_stress(gQ, 1.0) + 0.5 * coeffs.mu2 * W + coeffs.mu1 * kernels.commutator(Q, W)
    return sp.divergence(grid, stress)


def twist_constraint_residual(grid: Grid, Q: np.ndarray, W: np.ndarray, coeffs: Coefficients) -> float:
    """|P twist_forcing|_{L2} / (1 + |grad Q|^2_{L2}); zero iff the forcing is a gradient."""
    forcing = twist_forcing(grid, Q, W, coeffs)
    gQ = sp.gradient(grid, Q)
    return sp.l2_norm(grid, sp.leray_project(grid, forcing)) / (1.0 + _integrate(grid, gQ * gQ))


def energy_row(t: float, eb: EnergyBreakdown, constraint_residual: float = 0.0) -> tuple[float, ...]:
    return (
        t,
        eb.kinetic,
        eb.rotational,
        eb.elastic,
        eb.bulk,
        eb.total,
        eb.dissipation_newtonian,
        eb.dissipation_beta1,
        eb.dissipation_rotational,
        eb.cross_mu2tilde,
        eb.cross_mu2,
        constraint_residual,
    )


def fmt(x: float) -> str:
    return format(float(x), ".17g")


class EnergyCSVWriter:
    """Streams energy rows; the header is written on open."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(ENERGY_CSV_HEADER)

    def write(self, row: Iterable[float]) -> None:
        self._w.writerow([fmt(x) for x in row])
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_energy_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != ENERGY_CSV_HEADER:
        raise ValueError(f"{path}: not an energy CSV")
    data = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(-1, len(ENERGY_CSV_HEADER))
    return {name: data[:, i] for i, name in enumerate(ENERGY_CSV_HEADER)}


def is_monotone(totals: Sequence[float], tol: float) -> bool:
    e = np.asarray(totals, dtype=float)
    return bool(e.size < 2 or np.max(np.diff(e)) <= tol)
