"""Acceptance criteria 1-10. Each test records one PASS/FAIL line."""

import json
import math
import time

import numpy as np
import pytest

from conftest import record
from qsh import cli
from qsh import spectral as sp
from qsh.diagnostics import energy_breakdown, energy_law_residual, lyapunov_monitor
from qsh.dynamics import SimState, Stepper, cfl_dt
from qsh.io import random_smooth, read_snapshot, write_snapshot
from qsh.params import MBBA_RATIOS, Coefficients, Regime, preset_mbba, validate
from qsh.spectral import Grid
from qsh.tensor_algebra import bulk_potential, project_symmetric_traceless, reaction_term
from qsh.twistwave import (
    RadialGrid,
    bump_profile,
    compare_full_vs_radial,
    energy_balance_defect,
    radial_cfl_dt,
    radial_state_from,
    radial_step,
)

DECAY = Coefficients(
    a=1.0, b=0.0, c=1.0, L=1.0, J=0.1, mu1=1.0, mu2=0.0, mu2_tilde=0.0,
    beta1=0.1, beta4=5.0, beta5=0.0, beta6=0.0,
)
TWIST = Coefficients(a=1.0, b=0.0, c=1.0, L=1.0, J=4.0, mu1=1.0)


def test_criterion_01_structural_invariants():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    n_apps = 10_000
    worst = {"sym": 0.0, "leray": 0.0, "div": 0.0, "moll_idem": 0.0, "moll_adj": 0.0}
    grids = (Grid(2, 16), Grid(3, 8))
    for i in range(n_apps):
        d = 2 + i % 2
        M = rng.standard_normal((d, d))
        P = project_symmetric_traceless(M)
        worst["sym"] = max(worst["sym"], np.abs(project_symmetric_traceless(P) - P).max())

        g = grids[i % 2]
        v = rng.standard_normal((d,) + g.shape)
        Pv = sp.leray_project(g, v)
        worst["leray"] = max(worst["leray"], np.abs(sp.leray_project(g, Pv) - Pv).max())
        div_h = sp.divergence_hat(g, sp.to_spectral(g, Pv)[None])
        worst["div"] = max(worst["div"], np.abs(div_h).max() / (g.npoints * g.kmag.max()))

        f, h = rng.standard_normal((2,) + g.shape)
        n_cut = rng.integers(0, 3)
        Jf = sp.mollify(g, f, n_cut)
        worst["moll_idem"] = max(worst["moll_idem"], np.abs(sp.mollify(g, Jf, n_cut) - Jf).max())
        a = sp.inner_product_l2(g, Jf, h)
        b = sp.inner_product_l2(g, f, sp.mollify(g, h, n_cut))
        worst["moll_adj"] = max(worst["moll_adj"], abs(a - b) / (1.0 + abs(a)))
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-12 and elapsed < 10.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f" (tol 1e-12); {elapsed:.1f} s (< 10 s)"
    assert record(1, "structural invariants", ok, detail)


def _basis(d):
    """Orthonormal basis of symmetric traceless d x d matrices (Frobenius inner product)."""
    out = []
    for i in range(d):
        for j in range(i + 1, d):
            E = np.zeros((d, d))
            E[i, j] = E[j, i] = 1 / math.sqrt(2)
            out.append(E)
    for i in range(d - 1):
        D = np.zeros((d, d))
        D[: i + 1, : i + 1] = np.eye(i + 1)
        D[i + 1, i + 1] = -(i + 1)
        out.append(D / np.linalg.norm(D))
    return out


def test_criterion_02_variational_consistency():
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    eps = 1e-5
    worst = 0.0
    for d in (2, 3):
        k = Coefficients(a=-0.7, b=1.3, c=0.9, dim=d)
        basis = _basis(d)
        for _ in range(100):
            Q = project_symmetric_traceless(rng.standard_normal((d, d)))
            grad = sum(
                (bulk_potential(Q + eps * E, k) - bulk_potential(Q - eps * E, k)) / (2 * eps) * E for E in basis
            )
            R = reaction_term(Q, k)
            worst = max(worst, np.linalg.norm(grad + R) / max(np.linalg.norm(R), 1e-300))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 5.0
    assert record(2, "variational consistency", ok, f"max rel err {worst:.2e} (tol 1e-6); {elapsed:.2f} s")


def test_criterion_03_cancellation_identity():
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    g = Grid(2, 64)
    worst = 0.0
    for _ in range(100):
        v = sp.leray_project(g, sp.band_limited_random(g, rng, (2,), g.n / 3))
        Q = project_symmetric_traceless(sp.band_limited_random(g, rng, (2, 2), g.n / 3))
        gv = sp.gradient(g, v)
        gQ = sp.gradient(g, Q)
        stress = sp.dealias(g, np.einsum("abi...,abj...->ij...", gQ, gQ))
        adv = sp.dealias(g, np.einsum("abk...,k...->ab...", gQ, v))
        total = sp.inner_product_l2(g, stress, gv) + sp.inner_product_l2(g, adv, sp.laplacian(g, Q))
        scale = sp.l2_norm(g, gQ) ** 2 * sp.l2_norm(g, gv)
        worst = max(worst, abs(total) / scale)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 30.0
    assert record(3, "discrete cancellation", ok, f"max |sum|/scale {worst:.2e} (tol 1e-8); {elapsed:.1f} s")


def _decay_history(state, dt, nsteps):
    stepper = Stepper(state, DECAY)
    hist = [(stepper.state(), energy_breakdown(stepper.state(), DECAY))]
    for _ in range(nsteps):
        stepper.step(dt)
        s = stepper.state()
        hist.append((s, energy_breakdown(s, DECAY)))
    return hist


@pytest.mark.slow
def test_criterion_04_energy_decay():
    start = time.perf_counter()
    assert validate(DECAY, Regime.ENERGY_DECAY).ok
    g = Grid(2, 64)
    st = random_smooth(g, seed=0, amplitude=0.1)
    dt = 0.5 * cfl_dt(st, DECAY)
    h1 = _decay_history(st, dt, 2000)
    E = np.array([eb.total for _, eb in h1])
    worst_rise = float(np.max(np.diff(E))) / E[0]
    r1 = np.abs(energy_law_residual(h1, DECAY)).max()
    r2 = np.abs(energy_law_residual(_decay_history(st, 0.5 * dt, 4000), DECAY)).max()
    ratio = r1 / r2
    elapsed = time.perf_counter() - start
    ok = worst_rise <= 1e-8 and ratio >= 3.5 and elapsed < 300
    detail = (
        f"max step change {worst_rise:.2e}*E0 (tol 1e-8), E {E[0]:.4g}->{E[-1]:.4g}; "
        f"residual {r1:.2e}->{r2:.2e}, ratio {ratio:.2f} (>= 3.5); {elapsed:.0f} s"
    )
    assert record(4, "energy decay", ok, detail)


@pytest.mark.slow
def test_criterion_05_small_data_bounds():
    # integrating-factor RK4: the explicit step limit on this grid makes
    # 20 time units cost ~26k RK4 steps
    start = time.perf_counter()
    g = Grid(2, 64)
    st = random_smooth(g, seed=0, amplitude=1.0, amplitude_Q=0.1)
    scale = math.sqrt(1e-4 / lyapunov_monitor(st).phi)
    st = SimState(g, 0.0, st.v * scale, st.Q * scale, st.W * scale)
    phi0 = lyapunov_monitor(st).phi
    dt, T, every = 0.01, 20.0, 5
    stepper = Stepper(st, DECAY, method="ifrk4")
    phis, psis = [phi0], [lyapunov_monitor(st).psi]
    for n in range(1, int(round(T / dt)) + 1):
        stepper.step(dt)
        if n % every == 0:
            mon = lyapunov_monitor(stepper.state())
            phis.append(mon.phi)
            psis.append(mon.psi)
    sup_ratio = max(phis) / phi0
    int_ratio = float(np.trapezoid(psis, dx=every * dt)) / phi0
    elapsed = time.perf_counter() - start
    ok = sup_ratio <= 2.0 and int_ratio <= 10.0 and elapsed < 300
    detail = (
        f"Phi(0) {phi0:.2e}; sup Phi/Phi0 {sup_ratio:.3f} (<= 2); "
        f"int Psi/Phi0 {int_ratio:.3f} (<= 10); {elapsed:.0f} s"
    )
    assert record(5, "small-data bounds", ok, detail)


def _oscillator_errors(dts, T=2.0):
    g = Grid(2, 8)
    k = Coefficients(a=1.0, b=0.0, c=0.0, L=1.0, J=1.0, mu1=0.5, beta4=1.0)
    E = np.array([[1.0, 0.5], [0.5, -1.0]])
    Q0 = E[:, :, None, None] * np.cos(g.x[0])
    gamma = k.mu1 / k.J
    s = math.sqrt((k.L + k.a) / k.J - 0.25 * gamma**2)
    q = math.exp(-0.5 * gamma * T) * (math.cos(s * T) + 0.5 * gamma / s * math.sin(s * T))
    errs = []
    for dt in dts:
        stepper = Stepper(SimState(g, 0.0, np.zeros((2,) + g.shape), Q0, np.zeros_like(Q0)), k)
        for _ in range(int(round(T / dt))):
            stepper.step(dt)
        errs.append(np.abs(stepper.state().Q - q * Q0).max())
    return errs


def _taylor_green_errors(dts, T=1.0):
    g = Grid(2, 16)
    k = Coefficients(beta4=0.5)
    x, y = g.x
    v0 = np.array([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)])
    errs = []
    for dt in dts:
        stepper = Stepper(SimState(g, 0.0, v0, np.zeros((2, 2) + g.shape), np.zeros((2, 2) + g.shape)), k)
        for _ in range(int(round(T / dt))):
            stepper.step(dt)
        errs.append(np.abs(stepper.state().v - math.exp(-k.beta4 * T) * v0).max())
    return errs


def test_criterion_06_integrator_order():
    start = time.perf_counter()
    e = _oscillator_errors([0.05, 0.025, 0.0125, 0.00625])
    orders = [math.log2(e[i] / e[i + 1]) for i in range(3)]
    t = _taylor_green_errors([0.2, 0.1, 0.05])
    tg_orders = [math.log2(t[i] / t[i + 1]) for i in range(2)]
    elapsed = time.perf_counter() - start
    ok = min(orders) >= 3.8 and min(tg_orders) >= 3.8 and elapsed < 60
    detail = (
        f"oscillator orders {', '.join(f'{o:.2f}' for o in orders)}; "
        f"Taylor-Green orders {', '.join(f'{o:.2f}' for o in tg_orders)} (>= 3.8); {elapsed:.1f} s"
    )
    assert record(6, "integrator order", ok, detail)


@pytest.mark.slow
def test_criterion_07_twist_wave_pipeline():
    start = time.perf_counter()
    g = Grid(2, 128)
    R, T = math.pi, 1.0
    dt = radial_cfl_dt(TWIST, RadialGrid(R, 512, 2))
    dt = T / math.ceil(T / dt)
    reports = {}
    for m in (128, 256, 512):
        rg = RadialGrid(R, m, 2)
        reports[m] = compare_full_vs_radial(radial_state_from(bump_profile(0.1, 0.4), rg), TWIST, g, rg, T, dt, 20)
    disc = [reports[m].l2_discrepancy[-1] for m in (128, 256, 512)]
    orders = [math.log2(disc[0] / disc[1]), math.log2(disc[1] / disc[2])]
    fine = reports[512]
    h = R / 512
    constraint = fine.max_constraint
    origin = max(max(fine.origin_f), max(fine.origin_fr))
    elapsed = time.perf_counter() - start
    ok = min(orders) >= 1.9 and constraint <= 1e-5 and origin <= 10 * h * h and elapsed < 600
    detail = (
        f"discrepancy orders {orders[0]:.3f}, {orders[1]:.3f} (>= 1.9); "
        f"max constraint {constraint:.1e} (<= 1e-5); origin {origin:.1e} (<= {10 * h * h:.1e}); {elapsed:.0f} s"
    )
    assert record(7, "twist-wave pipeline", ok, detail)


def test_criterion_08_radial_energy_balance():
    start = time.perf_counter()
    k = TWIST.replace(b=1.0, dim=3)
    worst = []
    for m in (64, 128, 256, 512):
        rg = RadialGrid(math.pi, m, 3)
        st = radial_state_from(bump_profile(0.1, 0.4), rg)
        n = math.ceil(1.0 / radial_cfl_dt(k, rg))
        w = 0.0
        for _ in range(n):
            nxt = radial_step(st, k, rg, 1.0 / n)
            w = max(w, abs(energy_balance_defect(st, nxt, k, rg)))
            st = nxt
        worst.append(w)
    orders = [math.log2(worst[i] / worst[i + 1]) for i in range(3)]
    elapsed = time.perf_counter() - start
    ok = min(orders) >= 1.9 and elapsed < 60
    detail = f"d=3 per-step defect orders {', '.join(f'{o:.2f}' for o in orders)} (>= 1.9); {elapsed:.1f} s"
    assert record(8, "radial energy balance", ok, detail)


def test_criterion_09_mbba():
    start = time.perf_counter()
    k = preset_mbba(1.0)
    expected = {"mu2": -1.92, "beta1": 0.17, "beta4": 0.7, "beta5": 0.7, "beta6": -0.79}
    exact = all(getattr(k, name) / k.mu1 == value for name, value in expected.items()) and MBBA_RATIOS == expected
    report = validate(k, Regime.ENERGY_DECAY)
    names = [name for name, _ in report.violations]
    elapsed = time.perf_counter() - start
    ok = exact and not report.ok and "corotational" in names and elapsed < 1.0
    assert record(9, "MBBA preset", ok, f"ratios exact {exact}; violations {names}; {elapsed * 1e3:.1f} ms")


def test_criterion_10_determinism_and_io(tmp_path):
    start = time.perf_counter()
    cfg = tmp_path / "run.ini"
    cfg.write_text(
        "[coefficients]\na = 1\nb = 0\nc = 1\nJ = 0.1\nbeta1 = 0.1\nbeta4 = 5\n"
        "[grid]\nn = 32\n[time]\nt_end = 0.02\n[initial_data]\npreset = random_smooth\nseed = 11\n"
    )
    codes = [cli.main(["run", str(cfg), "--output-dir", str(tmp_path / d), "--threads", "1"]) for d in ("a", "b")]
    same_csv = (tmp_path / "a" / "energy.csv").read_bytes() == (tmp_path / "b" / "energy.csv").read_bytes()
    same_final = (tmp_path / "a" / "final.qsh").read_bytes() == (tmp_path / "b" / "final.qsh").read_bytes()
    monotone = json.loads((tmp_path / "a" / "summary.json").read_text())["monotone"]

    g = Grid(3, 16)
    st = random_smooth(g, seed=4, amplitude=0.3)
    st.t = 0.123456789
    write_snapshot(st, tmp_path / "s.qsh")
    back = read_snapshot(tmp_path / "s.qsh", g)
    round_trip = back.t == st.t and all(
        np.array_equal(a, b) for a, b in ((st.v, back.v), (st.Q, back.Q), (st.W, back.W))
    )
    elapsed = time.perf_counter() - start
    ok = codes == [0, 0] and same_csv and same_final and round_trip and elapsed < 60
    detail = (
        f"exit codes {codes}; identical CSV {same_csv}; identical final snapshot {same_final}; "
        f"monotone {monotone}; snapshot round trip {round_trip}; {elapsed:.1f} s"
    )
    assert record(10, "determinism and I/O", ok, detail)
