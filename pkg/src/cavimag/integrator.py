"""LLG time stepping with the cavity memory field.

The integrator is classical fixed-step RK4. Stage fields use Gamma with the
memory sums frozen at the last accepted step; once a step is accepted the
overlap of the new state is folded into the sums (right-endpoint rule).
"""

from __future__ import annotations

import csv
import logging
import math
import time as _time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import cavity as cav
from .errors import ConfigurationError
from .fields import CONTRIBUTIONS, DipoleKernel, ExcitationSpec, MaterialParams, effective_field
from .mesh import CellState, Mesh, average_magnetization

log = logging.getLogger(__name__)

TIMESERIES_HEADER = ("t", "mx", "my", "mz", "gamma", "overlap")

Recorder = Callable[[float, np.ndarray, float, float], None]


@dataclass
class RunConfig:
    dt: float
    duration: float
    record_every: int = 1
    renormalize_every: int = 1  # 0 disables renormalization

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if self.duration < 0:
            raise ConfigurationError(f"duration must be non-negative, got {self.duration}")
        if self.record_every < 1:
            raise ConfigurationError("record_every must be >= 1")
        if self.renormalize_every < 0:
            raise ConfigurationError("renormalize_every must be >= 0")

    @property
    def n_steps(self) -> int:
        # tolerate duration = k*dt landing a hair below k after division
        return int(math.floor(self.duration / self.dt + 1e-9))


@dataclass
class Engine:
    """Everything needed to advance one simulation."""

    mesh: Mesh
    state: CellState
    material: MaterialParams
    enabled: frozenset = frozenset({"zeeman"})
    b_ext: tuple = (0.0, 0.0, 0.0)
    excitation: ExcitationSpec | None = None
    cavity: cav.CavityParams | None = None
    memory: cav.MemoryAccumulators = field(default_factory=cav.MemoryAccumulators)
    time: float = 0.0
    threads: int = 1
    demag_limit: int | None = None
    _demag: DipoleKernel | None = field(default=None, repr=False)

    def __post_init__(self):
        self.enabled = frozenset(self.enabled)
        unknown = self.enabled - set(CONTRIBUTIONS)
        if unknown:
            raise ConfigurationError(f"unknown field contributions: {sorted(unknown)}")
        if self.state.m.shape != (self.mesh.n_cells, 3):
            raise ConfigurationError("state does not match mesh")
        self.b_ext = tuple(float(b) for b in np.asarray(self.b_ext, dtype=float).reshape(3))
        if self.cavity is None:
            self.enabled = self.enabled - {"cavity"}
        else:
            if self.cavity.b_rms.shape != (self.mesh.n_cells, 3):
                raise ConfigurationError("b_rms does not match mesh")
            self.enabled = self.enabled | {"cavity"}
        if "demag" in self.enabled:
            kwargs = {} if self.demag_limit is None else {"limit": self.demag_limit}
            self._demag = DipoleKernel(self.mesh, **kwargs)

    @property
    def cavity_enabled(self) -> bool:
        return self.cavity is not None

    def gamma(self, t_cav: float | None = None) -> float:
        if self.cavity is None:
            return 0.0
        t = self.memory.t_last if t_cav is None else t_cav
        return cav.gamma(self.memory, t, self.cavity)

    def overlap(self) -> float:
        if self.cavity is None:
            return 0.0
        return cav.weighted_overlap(self.state, self.cavity.b_rms, self.mesh)

    def field(self, m: np.ndarray, t: float, t_cav: float) -> np.ndarray:
        state = CellState(m, self.state.msat)
        cavity_map = None
        if self.cavity is not None:
            g = cav.gamma(self.memory, t_cav, self.cavity)
            if g != 0.0:
                cavity_map = self.cavity.b_rms * g
        return effective_field(
            state, self.mesh, self.material, self.enabled, t,
            b_ext=self.b_ext, excitation=self.excitation, cavity=cavity_map,
            demag_kernel=self._demag, threads=self.threads,
        )

    def reset_memory(self) -> None:
        cav.reset_memory(self.memory)


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    ax, ay, az = a[:, 0], a[:, 1], a[:, 2]
    bx, by, bz = b[:, 0], b[:, 1], b[:, 2]
    out[:, 0] = ay * bz - az * by
    out[:, 1] = az * bx - ax * bz
    out[:, 2] = ax * by - ay * bx
    return out


def llg_rhs(m: np.ndarray, b_eff: np.ndarray, params: MaterialParams) -> np.ndarray:
    """dm/dt = -gamma/(1+alpha^2) [m x B + alpha m x (m x B)].

    Vacuum rows (m = 0) give zero.
    """
    mxb = _cross(m, b_eff)
    torque = mxb + params.alpha * _cross(m, mxb)
    torque *= -params.gamma / (1.0 + params.alpha**2)
    return torque


def step_rk4(engine: Engine, dt: float, renormalize: bool = True) -> None:
    """Advance ``engine`` by one RK4 step and fold the new state into the memory."""
    m0 = engine.state.m
    t0 = engine.time
    tc = engine.memory.t_last
    par = engine.material
    half = 0.5 * dt

    k1 = llg_rhs(m0, engine.field(m0, t0, tc), par)
    m1 = m0 + half * k1
    k2 = llg_rhs(m1, engine.field(m1, t0 + half, tc + half), par)
    m2 = m0 + half * k2
    k3 = llg_rhs(m2, engine.field(m2, t0 + half, tc + half), par)
    m3 = m0 + dt * k3
    k4 = llg_rhs(m3, engine.field(m3, t0 + dt, tc + dt), par)

    engine.state.m = m0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if renormalize:
        engine.state.normalize()
    engine.time = t0 + dt
    if engine.cavity is not None:
        w = cav.weighted_overlap(engine.state, engine.cavity.b_rms, engine.mesh)
        cav.update_memory(engine.memory, w, tc + dt, dt, engine.cavity)


@dataclass
class TimeSeries:
    t: np.ndarray
    m: np.ndarray
    gamma: np.ndarray
    overlap: np.ndarray
    summary: dict = field(default_factory=dict)

    @property
    def mx(self) -> np.ndarray:
        return self.m[:, 0]

    @property
    def my(self) -> np.ndarray:
        return self.m[:, 1]

    @property
    def mz(self) -> np.ndarray:
        return self.m[:, 2]

    def component(self, name: str) -> np.ndarray:
        try:
            return {"x": self.mx, "y": self.my, "z": self.mz,
                    "gamma": self.gamma, "overlap": self.overlap}[name]
        except KeyError:
            raise ValueError(f"unknown component {name!r}") from None

    def write_csv(self, path) -> None:
        write_timeseries_csv(path, self.t, self.m, self.gamma, self.overlap)


def _fmt(x: float) -> str:
    return format(float(x), ".16e")


def write_timeseries_csv(path, t, m, gamma, overlap) -> None:
    m = np.asarray(m).reshape(-1, 3)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(TIMESERIES_HEADER) + "\n")
        for row in zip(t, m[:, 0], m[:, 1], m[:, 2], gamma, overlap):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_timeseries_csv(path) -> TimeSeries:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TIMESERIES_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = np.array([[float(v) for v in r] for r in reader], dtype=float).reshape(-1, 6)
    return TimeSeries(rows[:, 0], rows[:, 1:4], rows[:, 4], rows[:, 5])


def run(engine: Engine, config: RunConfig, recorders: Iterable[Recorder] = ()) -> TimeSeries:
    """Advance ``floor(duration/dt)`` steps, sampling every ``record_every`` steps.

    The first sample is the initial state. Each sample holds
    (t, <m>, Gamma, overlap); the same tuple goes to every recorder.
    """
    recorders = list(recorders)
    n_steps = config.n_steps
    n_rec = n_steps // config.record_every + 1
    ts = np.empty(n_rec)
    ms = np.empty((n_rec, 3))
    gs = np.empty(n_rec)
    ws = np.empty(n_rec)

    def record(k: int) -> None:
        t = engine.time
        m = average_magnetization(engine.state)
        g = engine.gamma()
        w = engine.overlap()
        ts[k], ms[k], gs[k], ws[k] = t, m, g, w
        for rec in recorders:
            rec(t, m, g, w)

    wall_start = _time.time()
    t_start = engine.time
    record(0)
    k = 1
    renorm = config.renormalize_every
    for n in range(1, n_steps + 1):
        step_rk4(engine, config.dt, renormalize=renorm > 0 and n % renorm == 0)
        # pin the clock to the grid instead of accumulating dt
        engine.time = t_start + n * config.dt
        if n % config.record_every == 0:
            record(k)
            k += 1
    wall_end = _time.time()

    summary = {
        "steps": n_steps,
        "records": n_rec,
        "dt": config.dt,
        "t_end": engine.time,
        "wall_start": wall_start,
        "wall_end": wall_end,
        "wall_seconds": wall_end - wall_start,
        "norm_drift": engine.state.norm_drift(),
        "cavity": "cavity enabled" if engine.cavity_enabled else "cavity disabled",
    }
    log.info("run finished: %d steps in %.3f s, |m| drift %.3e, %s",
             n_steps, summary["wall_seconds"], summary["norm_drift"], summary["cavity"])
    return TimeSeries(ts, ms, gs, ws, summary)
