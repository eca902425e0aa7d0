import json
import math

import numpy as np
import pytest

from conftest import random_state
from qsh import cli
from qsh import spectral as sp
from qsh.diagnostics import read_energy_csv, twist_constraint_residual
from qsh.dynamics import SimState
from qsh.io import (
    FormatError,
    MissingKey,
    ParseError,
    ShapeMismatch,
    UnknownKey,
    UnknownPreset,
    initial_data_presets,
    load_config,
    parse_config_text,
    random_smooth,
    read_snapshot,
    write_snapshot,
)
from qsh.params import Coefficients, preset_mbba
from qsh.spectral import Grid

MINIMAL = "[time]\nt_end = 0.1\n"

SMALL_RUN = """\
[coefficients]
a = 1
b = 0
c = 1
L = 1
J = 0.1
mu1 = 1
beta1 = 0.1
beta4 = 5

[grid]
n = 16

[time]
t_end = 0.05
dt = 0.005
output_every = 2

[initial_data]
preset = random_smooth
amplitude = 0.1
seed = 3
"""


def test_minimal_config_defaults():
    cfg = parse_config_text(MINIMAL)
    assert cfg.dt is None
    assert cfg.grid.dim == 2 and cfg.grid.n == 64
    assert cfg.mode == "full" and cfg.output_every == 1
    assert cfg.initial_data["preset"] == "zero"
    assert cfg.coefficients == Coefficients()


def test_unknown_key_names_key():
    with pytest.raises(UnknownKey) as info:
        parse_config_text("[coefficients]\nbetaa4 = 1\n[time]\nt_end = 1\n")
    assert "betaa4" in str(info.value)
    assert info.value.lineno == 2


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ParseError) as info:
        parse_config_text("[time]\nt_end = 1\n[grid]\nn = sixty\n")
    assert info.value.lineno == 4
    with pytest.raises(ParseError):
        parse_config_text("t_end = 1\n")
    with pytest.raises(ParseError):
        parse_config_text("[nonsense]\nx = 1\n")
    with pytest.raises(ParseError):
        parse_config_text("[time]\nt_end = -1\n")
    with pytest.raises(ParseError):
        parse_config_text("[time]\nt_end = 1\noutput_every = 0\n")
    with pytest.raises(ParseError):
        parse_config_text("[time]\nt_end = 1\n[run]\nmode = fast\n")


def test_missing_t_end():
    with pytest.raises(MissingKey):
        parse_config_text("[grid]\nn = 16\n")
    assert parse_config_text("[run]\nmode = validate\n").mode == "validate"


def test_mbba_preset():
    cfg = parse_config_text("[coefficients]\npreset = mbba\nmu1 = 2.0\n" + MINIMAL)
    assert cfg.coefficients == preset_mbba(2.0)
    with pytest.raises(MissingKey):
        parse_config_text("[coefficients]\npreset = mbba\n" + MINIMAL)
    with pytest.raises(ParseError):
        parse_config_text("[coefficients]\npreset = mbba\nmu1 = 1\nbeta4 = 3\n" + MINIMAL)


def test_overrides():
    cfg = parse_config_text(MINIMAL, ["coefficients.beta4=2.5", "grid.n=32"])
    assert cfg.coefficients.beta4 == 2.5 and cfg.grid.n == 32
    with pytest.raises(UnknownKey):
        parse_config_text(MINIMAL, ["coefficients.betaa4=1"])
    with pytest.raises(ParseError):
        parse_config_text(MINIMAL, ["beta4=1"])


def test_unknown_preset_and_missing_snapshot(tmp_path):
    with pytest.raises(UnknownPreset):
        parse_config_text("[initial_data]\npreset = vortex\n" + MINIMAL)
    with pytest.raises(Exception):
        parse_config_text(f"[initial_data]\nsnapshot = {tmp_path / 'none.qsh'}\n" + MINIMAL)
    with pytest.raises(UnknownPreset):
        initial_data_presets("vortex", {}, Grid(2, 8))


def test_load_config_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(SMALL_RUN)
    cfg = load_config(path)
    assert cfg.seed == 3 and cfg.dt == 0.005 and cfg.grid.n == 16
    with pytest.raises(Exception):
        load_config(tmp_path / "absent.ini")


def test_snapshot_round_trip(tmp_path, rng):
    g = Grid(2, 16)
    st = random_state(g, rng, 0.3)
    st.t = 1.25
    path = tmp_path / "s.qsh"
    write_snapshot(st, path)
    back = read_snapshot(path, g)
    assert back.t == st.t
    for a, b in ((st.v, back.v), (st.Q, back.Q), (st.W, back.W)):
        assert np.array_equal(a, b)


def test_snapshot_errors(tmp_path, rng):
    g = Grid(2, 16)
    path = tmp_path / "s.qsh"
    write_snapshot(random_state(g, rng), path)
    raw = path.read_bytes()
    trunc = tmp_path / "t.qsh"
    trunc.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(FormatError):
        read_snapshot(trunc)
    trunc.write_bytes(raw[:10])
    with pytest.raises(FormatError):
        read_snapshot(trunc)
    bad = tmp_path / "b.qsh"
    bad.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(FormatError):
        read_snapshot(bad)
    with pytest.raises(ShapeMismatch):
        read_snapshot(path, Grid(2, 32))
    with pytest.raises(ShapeMismatch):
        read_snapshot(path, Grid(3, 16))


def test_presets():
    g = Grid(2, 32)
    assert not initial_data_presets("zero", {}, g).v.any()
    tg = initial_data_presets("taylor_green", {}, g)
    x, y = g.x
    assert np.allclose(tg.v[0], np.sin(x) * np.cos(y))
    assert np.abs(sp.divergence(g, tg.v)).max() <= 1e-12
    hb = initial_data_presets("hedgehog_bump", {"amplitude": 0.1, "width": 0.4}, Grid(2, 128))
    assert twist_constraint_residual(hb.grid, hb.Q, hb.W, Coefficients()) <= 1e-5
    uc = initial_data_presets("uniaxial_constant", {"director": "0 1"}, g)
    assert np.allclose(uc.Q[1, 1], 0.05) and np.allclose(uc.Q[0, 0], -0.05)


def test_random_smooth():
    g = Grid(2, 32)
    a = random_smooth(g, seed=5, amplitude=0.2)
    b = random_smooth(g, seed=5, amplitude=0.2)
    assert np.array_equal(a.Q, b.Q)
    assert not np.array_equal(a.Q, random_smooth(g, seed=6).Q)
    assert math.sqrt(np.mean(np.sum(a.v**2, axis=0))) == pytest.approx(0.2, rel=1e-12)
    assert np.abs(sp.divergence(g, a.v)).max() <= 1e-12
    assert np.abs(np.einsum("ii...->...", a.Q)).max() <= 1e-15
    # band limited inside the dealiased range
    assert np.abs(sp.to_spectral(g, a.Q)[..., g.dealias_mask == 0]).max() <= 1e-14
    c = random_smooth(g, seed=5, amplitude=0.2, amplitude_Q=0.0)
    assert not c.Q.any()


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_run_deterministic(tmp_path):
    cfg = _write(tmp_path, SMALL_RUN)
    assert cli.main(["run", cfg, "--output-dir", str(tmp_path / "a"), "--threads", "1"]) == 0
    assert cli.main(["run", cfg, "--output-dir", str(tmp_path / "b"), "--threads", "1"]) == 0
    a = (tmp_path / "a" / "energy.csv").read_bytes()
    assert a == (tmp_path / "b" / "energy.csv").read_bytes()
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["status"] == "ok" and summary["monotone"] is True
    assert summary["steps"] == 10
    data = read_energy_csv(tmp_path / "a" / "energy.csv")
    assert data["t"].size == 6
    final = read_snapshot(tmp_path / "a" / "final.qsh")
    assert final.t == pytest.approx(0.05)


def test_cli_q_only_has_no_kinetic_energy(tmp_path):
    cfg = _write(tmp_path, SMALL_RUN.replace("[grid]", "[run]\nmode = q_only\n\n[grid]"))
    assert cli.main(["run", cfg, "--output-dir", str(tmp_path / "q")]) == 0
    data = read_energy_csv(tmp_path / "q" / "energy.csv")
    assert not data["kinetic"].any()
    assert np.isfinite(data["constraint_residual"]).all()


def test_cli_validate(tmp_path, capsys):
    ok = _write(tmp_path, SMALL_RUN)
    assert cli.main(["validate", ok]) == 0
    assert "EnergyDecay" in capsys.readouterr().out
    bad = _write(tmp_path, SMALL_RUN.replace("mu1 = 1", "mu1 = -1"), "bad.ini")
    assert cli.main(["validate", bad]) == 1


def test_cli_config_errors(tmp_path):
    assert cli.main(["run", _write(tmp_path, SMALL_RUN.replace("beta4", "betaa4"))]) == 3
    assert cli.main(["run", str(tmp_path / "missing.ini")]) == 3
    assert cli.main(["run", _write(tmp_path, SMALL_RUN), "--override", "grid.n=odd"]) == 3


def test_cli_nonfinite_keeps_last_good(tmp_path):
    cfg = _write(tmp_path, SMALL_RUN.replace("dt = 0.005", "dt = 5.0").replace("t_end = 0.05", "t_end = 50"))
    out = tmp_path / "blow"
    assert cli.main(["run", cfg, "--output-dir", str(out)]) == 2
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "nonfinite" and summary["failure_time"] > 0
    last = read_snapshot(out / "last_good.qsh")
    assert last.is_finite()


def test_cli_strict_validation(tmp_path):
    cfg = _write(tmp_path, SMALL_RUN.replace("mu1 = 1", "mu1 = -1").replace("[grid]", "[run]\nstrict = true\n\n[grid]"))
    assert cli.main(["run", cfg, "--output-dir", str(tmp_path / "s")]) == 1


def test_cli_compare_twistwave(tmp_path):
    text = """\
[coefficients]
a = 1
b = 0
c = 1
L = 1
J = 4
mu1 = 1

[grid]
n = 32

[time]
t_end = 0.05
dt = 0.01

[twistwave]
m = 64
"""
    out = tmp_path / "tw"
    assert cli.main(["compare-twistwave", _write(tmp_path, text), "--output-dir", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["steps"] == 5
    for name in ("compare.csv", "profile_initial.csv", "profile_final.csv", "final.qsh", "config.json"):
        assert (out / name).exists()
    assert isinstance(read_snapshot(out / "final.qsh"), SimState)
