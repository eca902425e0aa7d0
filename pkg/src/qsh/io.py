"""Run configuration, binary snapshots and initial-data presets.

Configs are INI files read with ``configparser``; every key is checked
against an allow-list so typos fail loudly.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import spectral as sp
from .dynamics import SimState
from .params import Coefficients, Regime, preset_mbba
from .spectral import Grid
from .tensor_algebra import hedgehog_field, project_symmetric_traceless


class ConfigError(Exception):
    """Base class for configuration problems (exit status 3)."""


class ParseError(ConfigError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno else message)


class MissingKey(ConfigError):
    pass


class UnknownKey(ConfigError):
    def __init__(self, section: str, key: str, lineno: int | None = None):
        self.section, self.key, self.lineno = section, key, lineno
        where = f" (line {lineno})" if lineno else ""
        super().__init__(f"unknown key {key!r} in section [{section}]{where}")


class UnknownPreset(ConfigError):
    pass


class FormatError(Exception):
    """Snapshot file is malformed or has the wrong magic."""


class ShapeMismatch(Exception):
    """Snapshot dimensions disagree with the configured grid."""


MODES = ("full", "q_only", "twistwave_compare", "validate")
PRESETS = ("zero", "taylor_green", "random_smooth", "uniaxial_constant", "hedgehog_bump")

_SCHEMA: dict[str, dict[str, type]] = {
    "coefficients": {name: float for name in Coefficients.names() if name != "dim"} | {"preset": str},
    "grid": {"dim": int, "n": int, "domain_length": float},
    "time": {
        "dt": str,
        "cfl_safety": float,
        "t_end": float,
        "output_every": int,
        "snapshot_every": int,
        "integrator": str,
    },
    "initial_data": {
        "preset": str,
        "snapshot": str,
        "seed": int,
        "amplitude": float,
        "amplitude_v": float,
        "amplitude_Q": float,
        "amplitude_W": float,
        "k0": float,
        "width": float,
        "director": str,
    },
    "run": {"mode": str, "regime": str, "strict": bool, "mollifier_n": float, "output_dir": str, "seed": int},
    "twistwave": {"m": int, "R": float, "sample_every": int, "allow_3d": bool},
}


@dataclass
class RunConfig:
    coefficients: Coefficients
    grid: Grid
    dt: float | None = None  # None means pick the CFL step every step
    cfl_safety: float = 0.4
    t_end: float = 1.0
    output_every: int = 1
    snapshot_every: int = 0
    integrator: str = "rk4"
    initial_data: dict = field(default_factory=lambda: {"preset": "zero"})
    mode: str = "full"
    regime: Regime = Regime.ENERGY_DECAY
    strict: bool = False
    mollifier_n: float | None = None
    seed: int = 0
    output_dir: str = "qsh_output"
    twistwave: dict = field(default_factory=dict)
    source: str | None = None


def _find_line(text: str, section: str, key: str) -> int | None:
    current = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
        elif current == section and line.split("=", 1)[0].split(":", 1)[0].strip() == key:
            return i
    return None


def _convert(section: str, key: str, raw: str, kind: type, lineno: int | None):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw.strip())
    except ValueError:
        raise ParseError(f"[{section}] {key}: cannot read {raw!r} as {kind.__name__}", lineno) from None


def parse_config_text(text: str, overrides: list[str] | None = None, source: str | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("expected a [section] header", exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ParseError("malformed line", lineno) from None
    except configparser.Error as exc:
        raise ParseError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from None

    values: dict[str, dict[str, object]] = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ParseError(f"unknown section [{section}]", _find_line(text, section, "") or None)
        for key, raw in cp.items(section):
            lineno = _find_line(text, section, key)
            if key not in _SCHEMA[section]:
                raise UnknownKey(section, key, lineno)
            values.setdefault(section, {})[key] = _convert(section, key, raw, _SCHEMA[section][key], lineno)

    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ParseError(f"override {item!r} must look like section.key=value")
        dotted, raw = item.split("=", 1)
        section, key = dotted.strip().split(".", 1)
        if section not in _SCHEMA:
            raise ParseError(f"override names unknown section [{section}]")
        if key not in _SCHEMA[section]:
            raise UnknownKey(section, key)
        values.setdefault(section, {})[key] = _convert(section, key, raw, _SCHEMA[section][key], None)

    return _build(values, source)


def _build(values: dict, source: str | None) -> RunConfig:
    g = values.get("grid", {})
    dim = int(g.get("dim", 2))
    try:
        grid = Grid(dim, int(g.get("n", 64)), float(g.get("domain_length", 2.0 * math.pi)))
    except ValueError as exc:
        raise ParseError(f"[grid] {exc}") from None

    c = dict(values.get("coefficients", {}))
    preset = c.pop("preset", None)
    try:
        if preset is None:
            coeffs = Coefficients(dim=dim, **c)
        elif str(preset).lower() == "mbba":
            if "mu1" not in c:
                raise MissingKey("[coefficients] preset = mbba needs mu1")
            base = preset_mbba(c["mu1"], dim=dim)
            scaled = {"mu2", "beta1", "beta4", "beta5", "beta6", "mu2_tilde"}
            clash = scaled & set(c)
            if clash:
                raise ParseError(f"[coefficients] {sorted(clash)} are fixed by the mbba preset")
            coeffs = base.replace(**{k: v for k, v in c.items() if k != "mu1"})
        else:
            raise ParseError(f"[coefficients] unknown preset {preset!r}")
    except (TypeError, ValueError) as exc:
        raise ParseError(f"[coefficients] {exc}") from None

    r = values.get("run", {})
    mode = str(r.get("mode", "full"))
    if mode not in MODES:
        raise ParseError(f"[run] mode must be one of {MODES}, got {mode!r}")
    try:
        regime = Regime.parse(str(r.get("regime", "EnergyDecay")))
    except ValueError as exc:
        raise ParseError(f"[run] {exc}") from None

    t = values.get("time", {})
    if "t_end" not in t and mode != "validate":
        raise MissingKey("[time] t_end is required")
    dt_raw = str(t.get("dt", "auto")).strip().lower()
    if dt_raw == "auto":
        dt = None
    else:
        try:
            dt = float(dt_raw)
        except ValueError:
            raise ParseError(f"[time] dt must be 'auto' or a number, got {dt_raw!r}") from None
        if not dt > 0:
            raise ParseError("[time] dt must be positive")
    t_end = float(t.get("t_end", 1.0))
    if not t_end > 0:
        raise ParseError("[time] t_end must be positive")
    output_every = int(t.get("output_every", 1))
    if output_every < 1:
        raise ParseError("[time] output_every must be >= 1")
    integrator = str(t.get("integrator", "rk4"))
    if integrator not in ("rk4", "ifrk4"):
        raise ParseError(f"[time] integrator must be rk4 or ifrk4, got {integrator!r}")

    init = dict(values.get("initial_data", {}))
    if "snapshot" in init:
        if "preset" in init:
            raise ParseError("[initial_data] give either preset or snapshot, not both")
        if not Path(str(init["snapshot"])).is_file():
            raise ConfigError(f"[initial_data] snapshot {init['snapshot']!r} does not exist")
    elif init.setdefault("preset", "zero") not in PRESETS:
        raise UnknownPreset(f"unknown initial-data preset {init['preset']!r}; choose from {PRESETS}")

    seed = int(init.pop("seed", r.get("seed", 0)))
    return RunConfig(
        coefficients=coeffs,
        grid=grid,
        dt=dt,
        cfl_safety=float(t.get("cfl_safety", 0.4)),
        t_end=t_end,
        output_every=output_every,
        snapshot_every=int(t.get("snapshot_every", 0)),
        integrator=integrator,
        initial_data=init,
        mode=mode,
        regime=regime,
        strict=bool(r.get("strict", False)),
        mollifier_n=r.get("mollifier_n"),
        seed=seed,
        output_dir=str(r.get("output_dir", "qsh_output")),
        twistwave=dict(values.get("twistwave", {})),
        source=source,
    )


def load_config(path, overrides: list[str] | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config_text(text, overrides, source=str(path))


def config_as_dict(cfg: RunConfig) -> dict:
    out = dataclasses.asdict(cfg)
    out["coefficients"] = cfg.coefficients.as_dict()
    out["grid"] = {"dim": cfg.grid.dim, "n": cfg.grid.n, "domain_length": cfg.grid.domain_length}
    out["regime"] = cfg.regime.value
    return out


# snapshots -----------------------------------------------------------------

MAGIC = b"QSH1"
_HEADER = struct.Struct("<4sIIddI")


def write_snapshot(state: SimState, path) -> None:
    """Little-endian: magic, u32 dim, u32 n, f64 length, f64 t, u32 count, then (u8 rank, f64 data) per field."""
    g = state.grid
    parts = [_HEADER.pack(MAGIC, g.dim, g.n, g.domain_length, state.t, 3)]
    for arr, rank in ((state.v, 1), (state.Q, 2), (state.W, 2)):
        parts.append(struct.pack("<B", rank))
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(parts))
    os.replace(tmp, path)


def read_snapshot(path, grid: Grid | None = None) -> SimState:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, dim, n, length, t, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    try:
        file_grid = Grid(dim, n, length)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if grid is not None and (grid.dim, grid.n) != (dim, n):
        raise ShapeMismatch(f"{path}: snapshot is dim={dim}, n={n}; expected dim={grid.dim}, n={grid.n}")
    if count != 3:
        raise FormatError(f"{path}: expected 3 fields, found {count}")
    offset = _HEADER.size
    fields_ = []
    for expected_rank in (1, 2, 2):
        if offset + 1 > len(data):
            raise FormatError(f"{path}: truncated field header")
        (rank,) = struct.unpack_from("<B", data, offset)
        offset += 1
        if rank != expected_rank:
            raise FormatError(f"{path}: field rank {rank}, expected {expected_rank}")
        shape = (dim,) * rank + (n,) * dim
        nbytes = 8 * int(np.prod(shape))
        if offset + nbytes > len(data):
            raise FormatError(f"{path}: truncated field data")
        fields_.append(np.frombuffer(data, dtype="<f8", count=nbytes // 8, offset=offset).reshape(shape).astype(float))
        offset += nbytes
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes")
    g = grid if grid is not None and grid.domain_length == length else file_grid
    return SimState(g, t, *fields_)


# initial data --------------------------------------------------------------


def _smooth_random(grid: Grid, rng: np.random.Generator, components: tuple[int, ...], k0: float) -> np.ndarray:
    raw = rng.standard_normal(components + grid.shape)
    envelope = np.exp(-grid.k2 / k0**2) * grid.dealias_mask
    return sp.to_physical(grid, sp.to_spectral(grid, raw) * envelope)


def _rms(grid: Grid, f: np.ndarray) -> float:
    return math.sqrt(float(np.sum(f * f)) / grid.npoints)


def _scaled(grid: Grid, f: np.ndarray, amplitude: float) -> np.ndarray:
    rms = _rms(grid, f)
    return f * (amplitude / rms) if rms > 0 else f


def random_smooth(
    grid: Grid,
    seed: int = 0,
    amplitude: float = 0.1,
    k0: float = 4.0,
    amplitude_v: float | None = None,
    amplitude_Q: float | None = None,
    amplitude_W: float | None = None,
) -> SimState:
    """Envelope exp(-|k|^2/k0^2) noise, projected, each field scaled to the given RMS amplitude."""
    d = grid.dim
    rng = np.random.default_rng(seed)
    v = sp.leray_project(grid, _smooth_random(grid, rng, (d,), k0))
    Q = project_symmetric_traceless(_smooth_random(grid, rng, (d, d), k0))
    W = project_symmetric_traceless(_smooth_random(grid, rng, (d, d), k0))
    amp = {
        "v": amplitude if amplitude_v is None else amplitude_v,
        "Q": amplitude if amplitude_Q is None else amplitude_Q,
        "W": amplitude if amplitude_W is None else amplitude_W,
    }
    return SimState(grid, 0.0, _scaled(grid, v, amp["v"]), _scaled(grid, Q, amp["Q"]), _scaled(grid, W, amp["W"]))


def taylor_green(grid: Grid, amplitude: float = 1.0) -> SimState:
    st = SimState.zeros(grid)
    x = grid.x
    if grid.dim == 2:
        st.v[0] = np.sin(x[0]) * np.cos(x[1])
        st.v[1] = -np.cos(x[0]) * np.sin(x[1])
    else:
        st.v[0] = np.sin(x[0]) * np.cos(x[1]) * np.cos(x[2])
        st.v[1] = -np.cos(x[0]) * np.sin(x[1]) * np.cos(x[2])
    st.v *= amplitude
    return st


def uniaxial_constant(grid: Grid, amplitude: float = 0.1, director=None) -> SimState:
    d = grid.dim
    nvec = np.zeros(d) if director is None else np.asarray(director, dtype=float)
    if director is None:
        nvec[0] = 1.0
    if nvec.shape != (d,) or not np.linalg.norm(nvec) > 0:
        raise ValueError(f"director must be a nonzero {d}-vector")
    nvec = nvec / np.linalg.norm(nvec)
    Q0 = amplitude * (np.outer(nvec, nvec) - np.eye(d) / d)
    st = SimState.zeros(grid)
    st.Q[...] = Q0.reshape((d, d) + (1,) * d)
    return st


def hedgehog_bump(grid: Grid, amplitude: float = 0.1, width: float = 0.4) -> SimState:
    """Q = A (r/w)^2 exp(-(r/w)^2) H(x - c) about the box centre, W = 0."""
    c = grid.domain_length / 2.0
    X = grid.x - c
    s = np.sum(X * X, axis=0) / width**2
    st = SimState.zeros(grid)
    st.Q = amplitude * s * np.exp(-s) * hedgehog_field(X)
    return st


def initial_data_presets(name: str, params: dict, grid: Grid) -> SimState:
    p = dict(params)
    p.pop("preset", None)
    seed = int(p.pop("seed", 0))
    if name == "zero":
        return SimState.zeros(grid)
    if name == "taylor_green":
        return taylor_green(grid, float(p.get("amplitude", 1.0)))
    if name == "random_smooth":
        return random_smooth(
            grid,
            seed=seed,
            amplitude=float(p.get("amplitude", 0.1)),
            k0=float(p.get("k0", 4.0)),
            amplitude_v=p.get("amplitude_v"),
            amplitude_Q=p.get("amplitude_Q"),
            amplitude_W=p.get("amplitude_W"),
        )
    if name == "uniaxial_constant":
        director = p.get("director")
        if isinstance(director, str):
            director = [float(x) for x in director.replace(",", " ").split()]
        return uniaxial_constant(grid, float(p.get("amplitude", 0.1)), director)
    if name == "hedgehog_bump":
        return hedgehog_bump(grid, float(p.get("amplitude", 0.1)), float(p.get("width", 0.4)))
    raise UnknownPreset(f"unknown initial-data preset {name!r}; choose from {PRESETS}")


def initial_state(cfg: RunConfig) -> SimState:
    init = cfg.initial_data
    if "snapshot" in init:
        return read_snapshot(init["snapshot"], cfg.grid)
    params = dict(init, seed=cfg.seed)
    return initial_data_presets(init["preset"], params, cfg.grid)
