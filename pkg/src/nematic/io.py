"""Run configuration, initial data, series output and binary snapshots.

Config files are INI-style text read with :mod:`configparser`; every key is
addressed as ``section.key`` (for instance ``params.alpha``).  See the README
for the full key list and defaults.

Snapshot layout (all little-endian)::

    offset  type        content
    0       4 bytes     magic b"NEMF"
    4       uint32      format version (1)
    8       uint32      dim
    12      uint32      resolution N
    16      float64     t
    24      5 x float64 nu, lambda, gamma, alpha, eta
    64      float64[]   samples of v (dim components) then d (dim components),
                        each C-ordered N^dim; 2 * dim * N^dim values
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .diagnostics import SERIES_FIELDS
from .integrator import SCHEMES, SchemeConfig
from .model import PhysParams, State
from .spectral import TorusGrid, VectorField, leray_project, random_field

__all__ = [
    "ConfigError",
    "ParseError",
    "ValidationError",
    "UnknownGenerator",
    "IoError",
    "FormatError",
    "GridMismatch",
    "GridConfig",
    "InitialConfig",
    "OutputConfig",
    "DetectConfig",
    "RunConfig",
    "load_config",
    "save_config",
    "parse_config",
    "generate_initial",
    "GENERATORS",
    "series_header",
    "series_rows",
    "write_series",
    "read_series",
    "write_snapshot",
    "read_snapshot",
]

MAGIC = b"NEMF"
VERSION = 1
_HEADER = struct.Struct("<4sIII6d")


class ConfigError(ValueError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class UnknownGenerator(ConfigError):
    pass


class IoError(OSError):
    pass


class FormatError(ValueError):
    """A snapshot file is malformed (bad magic, version or length)."""


class GridMismatch(ValueError):
    pass


# -- configuration ---------------------------------------------------------------

@dataclass(frozen=True)
class GridConfig:
    dim: int = 2
    resolution: int = 32
    padding_factor: Fraction = Fraction(3, 2)

    def build(self) -> TorusGrid:
        return TorusGrid(self.dim, self.resolution, self.padding_factor)


@dataclass(frozen=True)
class InitialConfig:
    generator: str = "perturbed_constant_director"
    seed: int = 0
    amplitude: float = 0.1
    mean_v: tuple[float, ...] = ()
    snapshot: str = ""


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    series: str = "series.csv"
    checkpoint: str = "checkpoint.nemf"
    diag_every: int = 10
    snapshot_every: int = 0


@dataclass(frozen=True)
class DetectConfig:
    tol_A: float = 1e-8
    tol_resid: float = 1e-6
    stop_when_steady: bool = False


@dataclass(frozen=True)
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    params: PhysParams = field(default_factory=PhysParams)
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    detect: DetectConfig = field(default_factory=DetectConfig)

    def replace(self, section: str, **changes) -> "RunConfig":
        """Copy with keys of one section changed (values already typed)."""
        current = getattr(self, section)
        try:
            updated = dataclasses.replace(current, **changes)
        except (ValueError, TypeError) as exc:
            key = f"{section}.{next(iter(changes))}" if changes else section
            raise ValidationError(key, str(exc)) from exc
        return dataclasses.replace(self, **{section: updated})


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip().strip("()[]")
    return tuple(float(x) for x in text.replace(",", " ").split()) if text else ()


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise ValueError("must be >= 0")
    return value


# section -> key in file -> (dataclass attribute, parser)
_SCHEMA = {
    "grid": {
        "dim": ("dim", int),
        "resolution": ("resolution", int),
        "padding_factor": ("padding_factor", lambda s: Fraction(s.strip())),
    },
    "params": {
        "nu": ("nu", float),
        "lambda": ("lam", float),
        "gamma": ("gamma", float),
        "alpha": ("alpha", float),
        "eta": ("eta", float),
    },
    "scheme": {
        "name": ("scheme", str.strip),
        "dt": ("dt", float),
        "t_end": ("t_end", float),
        "cfl_warn_threshold": ("cfl_warn_threshold", float),
        "frozen_director": ("frozen_director", _bool),
        "stabilization": ("stabilization", float),
    },
    "initial": {
        "generator": ("generator", str.strip),
        "seed": ("seed", int),
        "amplitude": ("amplitude", float),
        "mean_v": ("mean_v", _floats),
        "snapshot": ("snapshot", str.strip),
    },
    "output": {
        "dir": ("dir", str.strip),
        "series": ("series", str.strip),
        "checkpoint": ("checkpoint", str.strip),
        "diag_every": ("diag_every", _positive_int),
        "snapshot_every": ("snapshot_every", _positive_int),
    },
    "detect": {
        "tol_A": ("tol_A", float),
        "tol_resid": ("tol_resid", float),
        "stop_when_steady": ("stop_when_steady", _bool),
    },
}


def _validate_section(section: str, obj):
    """Checks that the dataclasses themselves do not perform."""
    if section == "grid":
        try:
            obj.build()
        except ValueError as exc:
            key = "grid.resolution" if "resolution" in str(exc) else (
                "grid.dim" if "dim" in str(exc) else "grid.padding_factor")
            raise ValidationError(key, str(exc)) from exc
    elif section == "initial":
        if obj.generator not in GENERATORS and not obj.snapshot:
            raise ValidationError("initial.generator", f"unknown generator {obj.generator!r}")
        if obj.amplitude < 0:
            raise ValidationError("initial.amplitude", "must be >= 0")
    elif section == "output":
        if obj.diag_every < 1:
            raise ValidationError("output.diag_every", "must be >= 1")
    elif section == "detect":
        if obj.tol_A <= 0:
            raise ValidationError("detect.tol_A", "must be > 0")
        if obj.tol_resid <= 0:
            raise ValidationError("detect.tol_resid", "must be > 0")


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ParseError(str(exc)) from exc
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ValidationError(section, "unknown section")
    cfg = RunConfig()
    for section, keys in _SCHEMA.items():
        if not parser.has_section(section):
            _validate_section(section, getattr(cfg, section))
            continue
        changes = {}
        for key, raw in parser.items(section):
            if key not in keys:
                raise ValidationError(f"{section}.{key}", "unknown key")
            attr, conv = keys[key]
            try:
                changes[attr] = conv(raw)
            except (ValueError, ZeroDivisionError) as exc:
                raise ValidationError(f"{section}.{key}", f"cannot parse {raw!r}: {exc}") from exc
        current = getattr(cfg, section)
        try:
            updated = dataclasses.replace(current, **changes)
        except ValueError as exc:
            raise ValidationError(_offending_key(section, str(exc), keys), str(exc)) from exc
        _validate_section(section, updated)
        cfg = dataclasses.replace(cfg, **{section: updated})
    return cfg


def _offending_key(section: str, message: str, keys: dict) -> str:
    """Map a dataclass validation message back to the key the user wrote."""
    for key, (attr, _) in keys.items():
        if message.startswith(attr + " ") or message.startswith(f"{attr!r}"):
            return f"{section}.{key}"
    if section == "scheme" and "scheme" in message:
        return "scheme.name"
    return section


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(x)) for x in value)
    return str(value)


def config_text(cfg: RunConfig) -> str:
    lines = []
    for section, keys in _SCHEMA.items():
        obj = getattr(cfg, section)
        lines.append(f"[{section}]")
        for key, (attr, _) in keys.items():
            lines.append(f"{key} = {_format_value(getattr(obj, attr))}")
        lines.append("")
    return "\n".join(lines)


def save_config(cfg: RunConfig, path) -> None:
    try:
        Path(path).write_text(config_text(cfg))
    except OSError as exc:
        raise IoError(f"cannot write config {path}: {exc}") from exc


# -- initial data ------------------------------------------------------------------

def _unit_director(grid: TorusGrid) -> VectorField:
    e1 = np.zeros(grid.dim)
    e1[0] = 1.0
    return VectorField.constant(grid, e1)


def _mean_field(grid: TorusGrid, mean_v) -> VectorField:
    m = np.zeros(grid.dim)
    if mean_v is not None and len(mean_v):
        if len(mean_v) != grid.dim:
            raise ValidationError("initial.mean_v", f"needs {grid.dim} components")
        m[:] = mean_v
    return VectorField.constant(grid, m)


def taylor_green(grid: TorusGrid, amplitude: float = 1.0, mean_v=None) -> State:
    """Taylor-Green vortex velocity with a unit constant director."""
    tp = 2.0 * np.pi
    if grid.dim == 2:
        def fn(x, y):
            return (amplitude * np.sin(tp * x) * np.cos(tp * y),
                    -amplitude * np.cos(tp * x) * np.sin(tp * y))
    else:
        def fn(x, y, z):
            return (amplitude * np.sin(tp * x) * np.cos(tp * y) * np.cos(tp * z),
                    -amplitude * np.cos(tp * x) * np.sin(tp * y) * np.cos(tp * z),
                    0.0 * x)
    v = VectorField.from_function(grid, fn)
    v = leray_project(v + _mean_field(grid, mean_v))
    return State(v, _unit_director(grid), 0.0)


def perturbed_constant_director(grid: TorusGrid, seed: int = 0, amplitude: float = 0.1,
                                mean_v=None) -> State:
    """Unit constant director plus a smooth random perturbation (modes |k_i| <= 3).

    The velocity is a divergence-free random field of the same RMS amplitude.
    Amplitude 0 gives the exact equilibrium v = 0, d = e_1.
    """
    rng = np.random.default_rng(seed)
    d = _unit_director(grid)
    v = _mean_field(grid, mean_v)
    if amplitude > 0:
        d = d + random_field(grid, rng, (grid.dim,), kmax=3, amplitude=amplitude)
        v = v + _random_velocity(grid, rng, amplitude, kmax=3)
    return State(leray_project(v), d, 0.0)


def random_smooth(grid: TorusGrid, seed: int = 0, amplitude: float = 0.1, mean_v=None) -> State:
    """Random smooth director and velocity (modes |k_i| <= 4) around (m_v, e_1)."""
    rng = np.random.default_rng(seed)
    d = _unit_director(grid) + random_field(grid, rng, (grid.dim,), kmax=4, amplitude=amplitude)
    v = _mean_field(grid, mean_v) + _random_velocity(grid, rng, amplitude, kmax=4)
    return State(leray_project(v), d, 0.0)


def _random_velocity(grid, rng, amplitude, kmax):
    u = leray_project(random_field(grid, rng, (grid.dim,), kmax=kmax, mean=False))
    rms = math.sqrt(float(np.sum(grid.parseval_weights * np.abs(u.coeffs) ** 2)) / grid.dim)
    return u * (amplitude / rms) if rms > 0 else u


GENERATORS = {
    "taylor_green": taylor_green,
    "perturbed_constant_director": perturbed_constant_director,
    "random_smooth": random_smooth,
}


def generate_initial(spec: InitialConfig, grid: TorusGrid) -> State:
    if spec.snapshot:
        return read_snapshot(spec.snapshot, expected_grid=grid)
    try:
        gen = GENERATORS[spec.generator]
    except KeyError:
        raise UnknownGenerator(f"unknown generator {spec.generator!r}; "
                               f"expected one of {sorted(GENERATORS)}") from None
    if gen is taylor_green:
        return gen(grid, spec.amplitude, spec.mean_v)
    return gen(grid, spec.seed, spec.amplitude, spec.mean_v)


# -- series ----------------------------------------------------------------------

def series_header(dim: int) -> list[str]:
    cols = []
    for name in SERIES_FIELDS:
        if name == "mean_v":
            cols += [f"mean_v_{i + 1}" for i in range(dim)]
        else:
            cols.append(name)
    return cols


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def series_rows(traj, dim: int | None = None) -> list[list[str]]:
    """Header plus one formatted row per DiagRecord."""
    if dim is None:
        dim = traj.grid.dim if traj.grid is not None else (
            len(traj.records[0].mean_v) if traj.records else 2)
    rows = [series_header(dim)]
    for rec in traj.records:
        row = []
        for name in SERIES_FIELDS:
            value = getattr(rec, name)
            if name == "mean_v":
                row += [_fmt(x) for x in value]
            else:
                row.append(_fmt(value))
        rows.append(row)
    return rows


def write_rows(rows, path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
    except OSError as exc:
        raise IoError(f"cannot write series {path}: {exc}") from exc


def write_series(traj, path, dim: int | None = None) -> None:
    """CSV with one header row and one row per DiagRecord, 17 significant digits."""
    write_rows(series_rows(traj, dim), path)


def read_series(path) -> dict[str, np.ndarray]:
    """Read a series CSV into column arrays (mean_v_i kept as separate columns)."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read series {path}: {exc}") from exc
    if not rows:
        raise FormatError(f"{path}: empty file, no header")
    header = rows[0]
    data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    if data.size == 0:
        data = np.zeros((0, len(header)))
    if data.shape[1] != len(header):
        raise FormatError(f"{path}: rows do not match header")
    return {name: data[:, i] for i, name in enumerate(header)}


# -- snapshots ---------------------------------------------------------------------

def write_snapshot(state: State, path, params: PhysParams | None = None) -> None:
    """Write real-space samples of v and d with a self-describing header."""
    if params is None:
        params = state.meta.get("params", PhysParams())
    g = state.grid
    header = _HEADER.pack(MAGIC, VERSION, g.dim, g.resolution, float(state.t),
                          params.nu, params.lam, params.gamma, params.alpha, params.eta)
    payload = np.concatenate([state.v.samples.ravel(), state.d.samples.ravel()])
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload.astype("<f8").tobytes())
    except OSError as exc:
        raise IoError(f"cannot write snapshot {path}: {exc}") from exc


def read_snapshot(path, expected_grid: TorusGrid | None = None, padding_factor=None) -> State:
    """Read a snapshot; the header's parameters are returned in ``state.meta["params"]``.

    Raises FormatError on a bad magic, version or truncated payload, and
    GridMismatch if ``expected_grid`` has a different dimension or resolution.
    """
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read snapshot {path}: {exc}") from exc
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, dim, n, t, nu, lam, gamma, alpha, eta = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dim not in (2, 3) or n < 8 or n & (n - 1):
        raise FormatError(f"{path}: invalid grid dim={dim} resolution={n}")
    count = 2 * dim * n ** dim
    if len(blob) != _HEADER.size + 8 * count:
        raise FormatError(f"{path}: payload holds {(len(blob) - _HEADER.size) / 8:g} "
                          f"values, expected {count}")
    if expected_grid is not None and (expected_grid.dim, expected_grid.resolution) != (dim, n):
        raise GridMismatch(f"{path}: snapshot grid {dim}D/{n} does not match "
                           f"{expected_grid.dim}D/{expected_grid.resolution}")
    if expected_grid is not None:
        grid = expected_grid
    else:
        grid = TorusGrid(dim, n, padding_factor if padding_factor is not None else Fraction(3, 2))
    values = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).astype(float)
    shape = (dim,) + (n,) * dim
    half = count // 2
    v = VectorField.from_samples(grid, values[:half].reshape(shape))
    d = VectorField.from_samples(grid, values[half:].reshape(shape))
    try:
        params = PhysParams(nu, lam, gamma, alpha, eta)
    except ValueError as exc:
        raise FormatError(f"{path}: invalid parameters in header: {exc}") from exc
    return State(v, d, t, meta={"params": params})
