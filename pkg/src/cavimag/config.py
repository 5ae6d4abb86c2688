"""Declarative simulation configs: parsing, validation, engine construction.

Format::

    # comment
    [cavity]
    omega_c = 2*pi*5e9
    b_rms = 1.0e-3, 0, 0

Scalars accept decimal/exponent notation plus ``pi`` and the operators
``+ - * / **``; vectors are comma triples. Keys are case-insensitive. Every
error carries the line it refers to.
"""

from __future__ import annotations

import ast
import copy
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cavity import CavityParams
from .constants import DEMAG_CELL_LIMIT, GAMMA_LL, HBAR
from .errors import ConfigurationError
from .fields import TIME_FUNCTIONS, ExcitationSpec, MaterialParams
from .integrator import Engine, RunConfig
from .mesh import CellState, Mesh, seed_vortex, set_disc_geometry
from .ovf import OvfError, map_to_mesh, read_ovf

_REQUIRED = object()

# section -> key -> (kind, default)
SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "mesh": {
        "nx": ("int", 1), "ny": ("int", 1), "nz": ("int", 1),
        "dx": ("float", _REQUIRED), "dy": ("float", _REQUIRED), "dz": ("float", _REQUIRED),
        "geometry": ("str", "box"), "radius": ("float", None),
    },
    "material": {
        "msat": ("float", _REQUIRED), "aex": ("float", 0.0), "ku1": ("float", 0.0),
        "anis_axis": ("vec3", (0.0, 0.0, 1.0)), "alpha": ("float", 0.0),
        "gamma": ("float", GAMMA_LL), "m_init": ("str", "0, 0, 1"),
        "polarity": ("int", 1), "chirality": ("int", 1), "core_radius": ("float", None),
    },
    "fields": {
        "b_ext": ("vec3", (0.0, 0.0, 0.0)), "exchange": ("bool", None),
        "anisotropy": ("bool", None), "demag": ("bool", False),
        "demag_limit": ("int", DEMAG_CELL_LIMIT),
    },
    "cavity": {
        "omega_c": ("float", None), "kappa": ("float", None), "x0": ("float", 0.0),
        "p0": ("float", 0.0), "b_rms": ("vec3", None), "b_rms_file": ("str", None),
        "hbar": ("float", HBAR),
    },
    "excitation": {
        "shape": ("vec3", None), "shape_file": ("str", None),
        "amplitude_scale": ("float", 1.0), "time_fn": ("str", "sinc"), "omega": ("float", 0.0),
    },
    "run": {
        "dt": ("float", _REQUIRED), "duration": ("float", _REQUIRED),
        "record_every": ("int", 1), "renormalize_every": ("int", 1),
    },
    "output": {
        "table": ("str", "table.csv"), "summary": ("str", "summary.txt"),
        "log": ("str", "run.log"), "map": ("str", "map.csv"),
    },
    "sweep": {
        "axis": ("str", _REQUIRED), "values": ("floats", _REQUIRED),
        "component": ("str", "x"), "window": ("str", "none"),
        "min_prominence": ("float", 0.05), "splitting": ("bool", False),
    },
}

# spellings borrowed from the scripting API of the original tool
ALIASES = {"cavity": {"wc": "omega_c"}}

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def _eval_number(text: str) -> float:
    """Float literal or a small arithmetic expression over literals and ``pi``."""
    try:
        return float(text)
    except ValueError:
        pass
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError:
        raise ValueError(f"not a number: {text!r}") from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        raise ValueError(f"not a number: {text!r}")

    try:
        value = ev(tree)
    except (ZeroDivisionError, OverflowError) as exc:
        raise ValueError(f"bad expression {text!r}: {exc}") from None
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def _convert(kind: str, raw: str):
    if kind == "float":
        return _eval_number(raw)
    if kind == "int":
        v = _eval_number(raw)
        if v != int(v):
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(v)
    if kind == "vec3":
        parts = [p for p in raw.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected a comma triple, got {raw!r}")
        return tuple(_eval_number(p) for p in parts)
    if kind == "floats":
        parts = [p for p in raw.split(",") if p.strip()]
        if not parts:
            raise ValueError("expected a comma-separated list of numbers")
        return tuple(_eval_number(p) for p in parts)
    if kind == "bool":
        low = raw.strip().lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected true/false, got {raw!r}")
    return raw.strip()


@dataclass
class SimConfig:
    sections: dict[str, dict[str, object]]
    lines: dict[tuple[str, str], int] = field(default_factory=dict)
    base_dir: Path = Path(".")

    def get(self, section: str, key: str):
        return self.sections.get(section, {}).get(key, SCHEMA[section][key][1])

    def has(self, section: str) -> bool:
        return section in self.sections

    def line_of(self, section: str, key: str | None = None) -> int | None:
        return self.lines.get((section, key or ""))

    @property
    def cavity_enabled(self) -> bool:
        return self.has("cavity") and (self.get("cavity", "b_rms") is not None
                                       or self.get("cavity", "b_rms_file") is not None)

    @property
    def run_config(self) -> RunConfig:
        r = self.sections["run"]
        return RunConfig(dt=r["dt"], duration=r["duration"], record_every=r["record_every"],
                         renormalize_every=r["renormalize_every"])

    def echo(self) -> list[str]:
        """``section.key: value`` lines for every explicit setting."""
        out = []
        for sec, values in self.sections.items():
            for key, val in values.items():
                if (sec, key) in self.lines:
                    out.append(f"{sec}.{key}: {_show(val)}")
        return out


def _show(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(repr(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def parse_config(text: str, base_dir: Path | str = ".") -> SimConfig:
    raw: dict[str, dict[str, object]] = {}
    lines: dict[tuple[str, str], int] = {}
    section = None
    for no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigurationError(f"malformed section header {stripped!r}", no)
            section = stripped[1:-1].strip().lower()
            if section not in SCHEMA:
                raise ConfigurationError(
                    f"unknown section [{section}]; expected one of {sorted(SCHEMA)}", no)
            if section in raw:
                raise ConfigurationError(f"section [{section}] appears twice", no)
            raw[section] = {}
            lines[(section, "")] = no
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"expected 'key = value', got {stripped!r}", no)
        if section is None:
            raise ConfigurationError("key outside of any [section]", no)
        key, value = (s.strip() for s in stripped.split("=", 1))
        key = key.lower()
        key = ALIASES.get(section, {}).get(key, key)
        if key not in SCHEMA[section]:
            raise ConfigurationError(f"unknown key {key!r} in [{section}]", no)
        if (section, key) in lines:
            raise ConfigurationError(f"duplicate key {key!r} in [{section}]", no)
        kind = SCHEMA[section][key][0]
        try:
            raw[section][key] = _convert(kind, value)
        except ValueError as exc:
            raise ConfigurationError(f"[{section}] {key}: {exc}", no) from None
        lines[(section, key)] = no

    for sec, values in raw.items():
        for key, (kind, default) in SCHEMA[sec].items():
            if key not in values:
                if default is _REQUIRED:
                    raise ConfigurationError(
                        f"missing required key {key!r} in [{sec}]", lines[(sec, "")])
                values[key] = default
    for sec in ("mesh", "material", "run"):
        if sec not in raw:
            raise ConfigurationError(f"missing required section [{sec}]", None)
    cfg = SimConfig(raw, lines, Path(base_dir))
    _validate(cfg)
    return cfg


def load_config(path) -> SimConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        return parse_config(text, path.parent)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None


def _validate(cfg: SimConfig) -> None:
    if cfg.has("cavity"):
        has_rms = cfg.get("cavity", "b_rms") is not None
        has_file = cfg.get("cavity", "b_rms_file") is not None
        if has_rms and has_file:
            raise ConfigurationError("give either b_rms or b_rms_file, not both",
                                     cfg.line_of("cavity", "b_rms_file"))
        if has_rms or has_file:
            for key in ("omega_c", "kappa"):
                if cfg.get("cavity", key) is None:
                    raise ConfigurationError(f"cavity run requires {key!r}",
                                             cfg.line_of("cavity"))
    if cfg.has("excitation"):
        if cfg.get("excitation", "time_fn") not in TIME_FUNCTIONS:
            raise ConfigurationError(f"time_fn must be one of {TIME_FUNCTIONS}",
                                     cfg.line_of("excitation", "time_fn"))
        if (cfg.get("excitation", "shape") is None) == (cfg.get("excitation", "shape_file") is None):
            raise ConfigurationError("excitation needs exactly one of shape, shape_file",
                                     cfg.line_of("excitation"))
    geometry = cfg.get("mesh", "geometry")
    if geometry not in ("box", "disc"):
        raise ConfigurationError(f"geometry must be box or disc, got {geometry!r}",
                                 cfg.line_of("mesh", "geometry"))
    if geometry == "disc" and cfg.get("mesh", "radius") is None:
        raise ConfigurationError("disc geometry requires radius", cfg.line_of("mesh", "geometry"))
    if cfg.has("sweep"):
        from .analysis import SWEEP_AXES

        if cfg.get("sweep", "axis") not in SWEEP_AXES:
            raise ConfigurationError(f"sweep axis must be one of {SWEEP_AXES}",
                                     cfg.line_of("sweep", "axis"))
        if cfg.get("sweep", "axis") in ("omega_c", "lambda") and not cfg.cavity_enabled:
            raise ConfigurationError("this sweep axis needs a cavity", cfg.line_of("sweep", "axis"))


def _field_from(cfg: SimConfig, section: str, vec_key: str, file_key: str, mesh: Mesh,
                where: np.ndarray) -> np.ndarray:
    vec = cfg.get(section, vec_key)
    if vec is not None:
        out = np.zeros((mesh.n_cells, 3))
        out[where] = vec
        return out
    path = cfg.base_dir / cfg.get(section, file_key)
    try:
        return map_to_mesh(read_ovf(path), mesh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}",
                                 cfg.line_of(section, file_key)) from None
    except OvfError as exc:
        raise ConfigurationError(f"{path}: {exc}", cfg.line_of(section, file_key)) from None


def build_engine(cfg: SimConfig, threads: int = 1) -> Engine:
    """Fresh engine from a validated config."""
    m = cfg.sections["mesh"]
    try:
        mesh = Mesh(m["nx"], m["ny"], m["nz"], m["dx"], m["dy"], m["dz"])
    except ConfigurationError as exc:
        raise ConfigurationError(str(exc), cfg.line_of("mesh")) from None
    mat = cfg.sections["material"]
    try:
        material = MaterialParams(msat=mat["msat"], aex=mat["aex"], ku1=mat["ku1"],
                                  anis_axis=mat["anis_axis"], alpha=mat["alpha"],
                                  gamma=mat["gamma"])
    except ConfigurationError as exc:
        raise ConfigurationError(str(exc), cfg.line_of("material")) from None

    state = CellState.uniform(mesh, mat["msat"], (0.0, 0.0, 1.0))
    if m["geometry"] == "disc":
        try:
            set_disc_geometry(state, mesh, m["radius"], mat["msat"])
        except ValueError as exc:
            raise ConfigurationError(str(exc), cfg.line_of("mesh", "radius")) from None
    m_init = mat["m_init"]
    if m_init.lower() == "vortex":
        seed_vortex(state, mesh, mat["polarity"], mat["chirality"], mat["core_radius"])
    else:
        try:
            direction = np.array(_convert("vec3", m_init))
            norm = float(np.linalg.norm(direction))
            if norm == 0.0:
                raise ValueError("m_init must be nonzero")
        except ValueError as exc:
            raise ConfigurationError(f"[material] m_init: {exc}",
                                     cfg.line_of("material", "m_init")) from None
        state.m[state.magnetic] = direction / norm

    enabled = {"zeeman"}
    ex = cfg.get("fields", "exchange")
    if ex or (ex is None and mat["aex"] > 0):
        enabled.add("exchange")
    an = cfg.get("fields", "anisotropy")
    if an or (an is None and mat["ku1"] != 0):
        enabled.add("anisotropy")
    if cfg.get("fields", "demag"):
        enabled.add("demag")

    excitation = None
    if cfg.has("excitation"):
        e = cfg.sections["excitation"]
        shape = _field_from(cfg, "excitation", "shape", "shape_file", mesh, state.magnetic)
        excitation = ExcitationSpec(shape, e["amplitude_scale"], e["time_fn"], e["omega"])
        enabled.add("excitation")

    cavity = None
    if cfg.cavity_enabled:
        c = cfg.sections["cavity"]
        b_rms = _field_from(cfg, "cavity", "b_rms", "b_rms_file", mesh, state.magnetic)
        try:
            cavity = CavityParams(omega_c=c["omega_c"], kappa=c["kappa"], b_rms=b_rms,
                                  cell_volume=mesh.cell_volume, x0=c["x0"], p0=c["p0"],
                                  hbar=c["hbar"])
        except ConfigurationError as exc:
            raise ConfigurationError(str(exc), cfg.line_of("cavity")) from None

    return Engine(mesh, state, material, enabled=enabled, b_ext=cfg.get("fields", "b_ext"),
                  excitation=excitation, cavity=cavity, threads=threads,
                  demag_limit=cfg.get("fields", "demag_limit"))


def with_sweep_value(cfg: SimConfig, axis: str, value: float) -> SimConfig:
    """Copy of ``cfg`` with one swept parameter replaced.

    ``lambda`` rescales a uniform b_rms so that
    gamma * |b_rms| * sqrt(S/2) = value, with S = sum(Ms Vc) / (hbar gamma).
    """
    new = copy.deepcopy(cfg)
    if axis == "omega_c":
        new.sections["cavity"]["omega_c"] = value
    elif axis == "b_ext_z":
        bx, by, _ = new.get("fields", "b_ext")
        new.sections.setdefault("fields", {})["b_ext"] = (bx, by, value)
    elif axis == "lambda":
        b = new.get("cavity", "b_rms")
        if b is None:
            raise ConfigurationError("lambda sweep needs a uniform b_rms vector")
        norm = math.sqrt(sum(x * x for x in b))
        if norm == 0.0:
            raise ConfigurationError("lambda sweep needs a nonzero b_rms direction")
        mat = new.sections["material"]
        n_mag = _magnetic_count(new)
        gamma = mat["gamma"]
        s_total = mat["msat"] * n_mag * _cell_volume(new) / (new.get("cavity", "hbar") * gamma)
        scale = value / gamma * math.sqrt(2.0 / s_total) / norm
        new.sections["cavity"]["b_rms"] = tuple(x * scale for x in b)
    else:
        raise ConfigurationError(f"unknown sweep axis {axis!r}")
    return new


def _cell_volume(cfg: SimConfig) -> float:
    m = cfg.sections["mesh"]
    return m["dx"] * m["dy"] * m["dz"]


def _magnetic_count(cfg: SimConfig) -> int:
    m = cfg.sections["mesh"]
    mesh = Mesh(m["nx"], m["ny"], m["nz"], m["dx"], m["dy"], m["dz"])
    state = CellState.uniform(mesh, cfg.sections["material"]["msat"])
    if m["geometry"] == "disc":
        set_disc_geometry(state, mesh, m["radius"], cfg.sections["material"]["msat"])
    return state.n_magnetic


def sweep_factory(cfg: SimConfig, threads: int = 1):
    def factory(axis: str, value: float) -> Engine:
        return build_engine(with_sweep_value(cfg, axis, value), threads=threads)
    return factory
