"""Command-line front end: ``qsh run | validate | compare-twistwave``.

Exit status: 0 success, 1 validation failure, 2 numerical failure,
3 I/O or configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import spectral as sp
from .diagnostics import EnergyCSVWriter, energy_breakdown, energy_row, is_monotone, twist_constraint_residual
from .dynamics import NonFiniteError, SimState, Stepper, cfl_dt, cfl_dt_integrating_factor
from .io import (
    ConfigError,
    FormatError,
    RunConfig,
    ShapeMismatch,
    config_as_dict,
    initial_state,
    load_config,
    write_snapshot,
)
from .params import validate
from .twistwave import (
    RadialGrid,
    bump_profile,
    compare_full_vs_radial,
    radial_cfl_dt,
    radial_state_from,
    write_compare_csv,
    write_profile_csv,
)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

# energy may rise by this fraction of E(0) per sample before a run is called non-monotone
MONOTONE_TOL = 1e-8


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=float) + "\n")


def run_validate(cfg: RunConfig, out=None) -> int:
    out = sys.stdout if out is None else out
    report = validate(cfg.coefficients, cfg.regime)
    print(f"regime: {cfg.regime.value}", file=out)
    print(report.format(), file=out)
    return EXIT_OK if report.ok else EXIT_VALIDATION


def _choose_dt(cfg: RunConfig, stepper: Stepper) -> float:
    if cfg.dt is not None:
        return cfg.dt
    state = stepper.state()
    if cfg.integrator == "ifrk4":
        return cfl_dt_integrating_factor(state, cfg.coefficients, cfg.cfl_safety)
    return cfl_dt(state, cfg.coefficients, cfg.cfl_safety)


def run_simulation(cfg: RunConfig, out_dir: Path) -> int:
    q_only = cfg.mode == "q_only"
    state = initial_state(cfg)
    if q_only:
        state.v[...] = 0.0
    k = cfg.coefficients
    stepper = Stepper(state, k, n_cut=cfg.mollifier_n, freeze_velocity=q_only, method=cfg.integrator)
    g = cfg.grid

    totals: list[float] = []
    residuals: list[float] = []
    summary: dict = {"mode": cfg.mode, "status": "ok", "failure_time": None}
    last_good = out_dir / "last_good.qsh"

    def sample(writer: EnergyCSVWriter) -> None:
        st = stepper.state()
        eb = energy_breakdown(st, k)
        res = twist_constraint_residual(g, st.Q, st.W, k) if q_only else math.nan
        writer.write(energy_row(st.t, eb, res))
        totals.append(eb.total)
        if q_only:
            residuals.append(res)
        write_snapshot(st, last_good)

    step = 0
    status = EXIT_OK
    with EnergyCSVWriter(out_dir / "energy.csv") as writer:
        sample(writer)
        dt = _choose_dt(cfg, stepper)
        try:
            while stepper.t < cfg.t_end * (1.0 - 1e-12):
                h = min(dt, cfg.t_end - stepper.t)
                stepper.step(h)
                step += 1
                if step % cfg.output_every == 0 or stepper.t >= cfg.t_end * (1.0 - 1e-12):
                    sample(writer)
                    if cfg.dt is None:
                        dt = _choose_dt(cfg, stepper)
                if cfg.snapshot_every and step % cfg.snapshot_every == 0:
                    write_snapshot(stepper.state(), out_dir / f"snapshot_{step:08d}.qsh")
        except NonFiniteError as exc:
            summary["status"] = "nonfinite"
            summary["failure_time"] = exc.t
            status = EXIT_NUMERICAL

    if status == EXIT_OK:
        final = stepper.state()
        write_snapshot(final, out_dir / "final.qsh")
        summary["final_norms"] = {
            "v_l2": sp.l2_norm(g, final.v),
            "Q_l2": sp.l2_norm(g, final.Q),
            "W_l2": sp.l2_norm(g, final.W),
        }
    e0 = totals[0] if totals else 0.0
    increases = np.diff(totals) if len(totals) > 1 else np.zeros(1)
    summary.update(
        t_final=stepper.t,
        steps=step,
        energy_initial=e0,
        energy_final=totals[-1] if totals else 0.0,
        max_energy_increase=float(np.max(increases)),
        monotone=is_monotone(totals, MONOTONE_TOL * abs(e0)),
        max_constraint_residual=max(residuals) if residuals else None,
    )
    _write_json(out_dir / "summary.json", summary)
    return status


def run_twistwave_compare(cfg: RunConfig, out_dir: Path) -> int:
    g = cfg.grid
    k = cfg.coefficients
    tw = cfg.twistwave
    rgrid = RadialGrid(float(tw.get("R", g.domain_length / 2.0)), int(tw.get("m", 512)), g.dim)
    init = cfg.initial_data
    profile = bump_profile(float(init.get("amplitude", 0.1)), float(init.get("width", 0.4)))
    radial0 = radial_state_from(profile, rgrid)
    if cfg.dt is None:
        # velocity is frozen, so the viscous bound does not apply
        frozen = k.replace(beta4=0.0)
        dt = min(radial_cfl_dt(k, rgrid, cfg.cfl_safety), cfl_dt(SimState.zeros(g), frozen, cfg.cfl_safety))
        dt = cfg.t_end / math.ceil(cfg.t_end / dt)
    else:
        dt = cfg.dt
    nsteps = int(round(cfg.t_end / dt))
    dt = cfg.t_end / nsteps
    sample_every = int(tw.get("sample_every", max(1, nsteps // 20)))
    summary: dict = {"mode": cfg.mode, "status": "ok", "failure_time": None}
    try:
        report = compare_full_vs_radial(
            radial0, k, g, rgrid, cfg.t_end, dt, sample_every=sample_every, allow_3d=bool(tw.get("allow_3d", False))
        )
    except NonFiniteError as exc:
        summary.update(status="nonfinite", failure_time=exc.t)
        _write_json(out_dir / "summary.json", summary)
        return EXIT_NUMERICAL
    write_profile_csv(out_dir / "profile_initial.csv", radial0, rgrid)
    write_profile_csv(out_dir / "profile_final.csv", report.final_radial, rgrid)
    write_compare_csv(out_dir / "compare.csv", report)
    write_snapshot(report.final_full, out_dir / "final.qsh")
    summary.update(
        t_final=cfg.t_end,
        steps=nsteps,
        dt=dt,
        l2_discrepancy_final=report.l2_discrepancy[-1],
        max_constraint_residual=report.max_constraint,
        max_origin_f=max(report.origin_f),
        max_origin_fr=max(report.origin_fr),
    )
    _write_json(out_dir / "summary.json", summary)
    return EXIT_OK


def run(cfg: RunConfig, output_dir: str | os.PathLike | None = None) -> int:
    if cfg.mode == "validate":
        return run_validate(cfg)
    report = validate(cfg.coefficients, cfg.regime)
    if not report.ok:
        print(report.format(), file=sys.stderr)
        if cfg.strict:
            return EXIT_VALIDATION
    out_dir = Path(output_dir or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "config.json", config_as_dict(cfg))
    if cfg.mode == "twistwave_compare":
        return run_twistwave_compare(cfg, out_dir)
    return run_simulation(cfg, out_dir)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsh", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "run the experiment described by a config file"),
        ("validate", "check coefficients against the configured regime"),
        ("compare-twistwave", "radial solver vs full Q-tensor solver"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config")
        p.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
        if name != "validate":
            p.add_argument("--output-dir")
            p.add_argument("--threads", type=int)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    threads = getattr(args, "threads", None)
    try:
        if threads is not None:
            sp.set_threads(threads)
        cfg = load_config(args.config, args.override)
        if args.command == "validate":
            cfg.mode = "validate"
        elif args.command == "compare-twistwave":
            cfg.mode = "twistwave_compare"
        elif cfg.mode == "validate":
            return run_validate(cfg)
        return run(cfg, getattr(args, "output_dir", None))
    except (ConfigError, FormatError, ShapeMismatch, OSError) as exc:
        print(f"qsh: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"qsh: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
