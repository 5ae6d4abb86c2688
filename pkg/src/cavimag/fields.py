"""Non-cavity effective-field contributions and the excitation drive.

All functions return ``(n_cells, 3)`` field maps in tesla with vacuum rows
set to zero.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .constants import DEMAG_CELL_LIMIT, GAMMA_LL, MU0
from .errors import ConfigurationError
from .mesh import CellState, FieldMap, Mesh

# Field terms in the order they are summed.
CONTRIBUTIONS = ("zeeman", "exchange", "anisotropy", "demag", "excitation", "cavity")

_DEMAG_BLOCK = 256


@dataclass
class MaterialParams:
    msat: float
    aex: float = 0.0
    ku1: float = 0.0
    anis_axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    alpha: float = 0.0
    gamma: float = GAMMA_LL

    def __post_init__(self):
        if self.msat < 0 or self.aex < 0 or self.alpha < 0:
            raise ConfigurationError("msat, aex and alpha must be non-negative")
        if not self.gamma > 0:
            raise ConfigurationError(f"gamma must be positive, got {self.gamma}")
        axis = np.asarray(self.anis_axis, dtype=float)
        if self.ku1 != 0 and abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise ConfigurationError("anis_axis must be a unit vector when ku1 != 0")
        self.anis_axis = tuple(float(a) for a in axis)


def sinc(x: float) -> float:
    """Unnormalized sinc, sin(x)/x."""
    return 1.0 if x == 0 else math.sin(x) / x


TIME_FUNCTIONS = ("sinc", "sin", "constant", "none")


@dataclass
class ExcitationSpec:
    """Drive ``shape * amplitude_scale * f(t)`` with f one of
    sinc(omega*t), sin(omega*t), 1, 0."""

    shape: FieldMap
    amplitude_scale: float = 1.0
    time_fn: str = "sinc"
    omega: float = 0.0

    def __post_init__(self):
        if self.time_fn not in TIME_FUNCTIONS:
            raise ConfigurationError(f"time_fn must be one of {TIME_FUNCTIONS}, got {self.time_fn!r}")
        self.shape = np.asarray(self.shape, dtype=float)

    def envelope(self, t: float) -> float:
        if self.time_fn == "sinc":
            return sinc(self.omega * t)
        if self.time_fn == "sin":
            return math.sin(self.omega * t)
        if self.time_fn == "constant":
            return 1.0
        return 0.0


def zeeman_field(b_ext, state: CellState) -> FieldMap:
    out = np.zeros_like(state.m)
    out[state.msat > 0] = np.asarray(b_ext, dtype=float).reshape(3)
    return out


def exchange_field(state: CellState, mesh: Mesh, params: MaterialParams) -> FieldMap:
    """Six-neighbour exchange field with free boundaries.

    B(i) = 2A/Ms_i * sum_j (m_j - m_i) / d_ij^2 over magnetic neighbours j.
    """
    out = np.zeros_like(state.m)
    if params.aex == 0 or mesh.n_cells == 1:
        return out
    m = state.m.reshape(mesh.nz, mesh.ny, mesh.nx, 3)
    mag = (state.msat > 0).reshape(mesh.shape)
    lap = out.reshape(mesh.nz, mesh.ny, mesh.nx, 3)
    # array axes (0, 1, 2) are (z, y, x)
    for axis, step in ((2, mesh.dx), (1, mesh.dy), (0, mesh.dz)):
        if m.shape[axis] < 2:
            continue
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        pair = (mag[lo] & mag[hi])[..., None]
        diff = np.where(pair, m[hi] - m[lo], 0.0) / step**2
        lap[lo] += diff
        lap[hi] -= diff
    mag_flat = state.msat > 0
    out[mag_flat] *= (2.0 * params.aex / state.msat[mag_flat])[:, None]
    out[~mag_flat] = 0.0
    return out


def uniaxial_anisotropy_field(state: CellState, params: MaterialParams) -> FieldMap:
    out = np.zeros_like(state.m)
    if params.ku1 == 0:
        return out
    u = np.asarray(params.anis_axis)
    mag = state.msat > 0
    proj = state.m[mag] @ u
    out[mag] = (2.0 * params.ku1 / state.msat[mag] * proj)[:, None] * u
    return out


class DipoleKernel:
    """Point-dipole interaction tensors between all cell pairs of a mesh.

    Each source cell j is a dipole ``mu_j = Ms_j * Vc * m_j`` at its center;
    the field at target i is ``mu0/4pi * sum_j (3 r r^T - |r|^2 I) mu_j / |r|^5``
    with the self term left out. Targets are processed in fixed blocks so the
    result does not depend on the number of worker threads.
    """

    def __init__(self, mesh: Mesh, limit: int = DEMAG_CELL_LIMIT, cache_cells: int = 512):
        if mesh.n_cells > limit:
            raise ConfigurationError(
                f"demag direct sum limited to {limit} cells, mesh has {mesh.n_cells}; "
                "disable demag or shrink the mesh"
            )
        self.mesh = mesh
        self.pos = mesh.centers()
        self._blocks = [
            (start, min(start + _DEMAG_BLOCK, mesh.n_cells))
            for start in range(0, mesh.n_cells, _DEMAG_BLOCK)
        ]
        self._cache = None
        if mesh.n_cells <= cache_cells:
            self._cache = [self._tensor(a, b) for a, b in self._blocks]

    def _tensor(self, start: int, stop: int) -> np.ndarray:
        r = self.pos[None, :, :] - self.pos[start:stop, None, :]
        r2 = np.einsum("ijk,ijk->ij", r, r)
        idx = np.arange(start, stop)
        r2[idx - start, idx] = 1.0  # self term, zeroed below
        inv5 = r2**-2.5
        t = 3.0 * r[..., :, None] * r[..., None, :]
        t -= r2[..., None, None] * np.eye(3)
        t *= (MU0 / (4 * math.pi) * inv5)[..., None, None]
        t[idx - start, idx] = 0.0
        # (targets, 3) x (sources, 3) matrix so a block is one matrix-vector product
        return np.ascontiguousarray(t.transpose(0, 2, 1, 3).reshape(3 * (stop - start), -1))

    def field(self, state: CellState, threads: int = 1) -> FieldMap:
        moment = state.m * (state.msat * self.mesh.cell_volume)[:, None]
        flat = moment.reshape(-1)

        def block(k: int) -> np.ndarray:
            start, stop = self._blocks[k]
            t = self._cache[k] if self._cache is not None else self._tensor(start, stop)
            return (t @ flat).reshape(-1, 3)

        if threads > 1 and len(self._blocks) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(block, range(len(self._blocks))))
        else:
            parts = [block(k) for k in range(len(self._blocks))]
        out = np.concatenate(parts, axis=0)
        out[state.msat == 0] = 0.0
        return out


def demag_field(state: CellState, mesh: Mesh, limit: int = DEMAG_CELL_LIMIT,
                threads: int = 1, kernel: DipoleKernel | None = None) -> FieldMap:
    if kernel is None:
        kernel = DipoleKernel(mesh, limit=limit)
    return kernel.field(state, threads=threads)


def excitation_field(spec: ExcitationSpec, t: float) -> FieldMap:
    return spec.shape * (spec.amplitude_scale * spec.envelope(t))


def effective_field(
    state: CellState,
    mesh: Mesh,
    params: MaterialParams,
    enabled,
    t: float,
    *,
    b_ext=(0.0, 0.0, 0.0),
    excitation: ExcitationSpec | None = None,
    cavity: FieldMap | None = None,
    demag_kernel: DipoleKernel | None = None,
    threads: int = 1,
) -> FieldMap:
    """Sum of the enabled contributions, added in ``CONTRIBUTIONS`` order.

    ``cavity`` is the already evaluated cavity field map (B_rms * Gamma).
    """
    enabled = set(enabled)
    unknown = enabled - set(CONTRIBUTIONS)
    if unknown:
        raise ConfigurationError(f"unknown field contributions: {sorted(unknown)}")
    total = np.zeros_like(state.m)
    if "zeeman" in enabled:
        total += zeeman_field(b_ext, state)
    if "exchange" in enabled:
        total += exchange_field(state, mesh, params)
    if "anisotropy" in enabled:
        total += uniaxial_anisotropy_field(state, params)
    if "demag" in enabled:
        total += demag_field(state, mesh, threads=threads, kernel=demag_kernel)
    if "excitation" in enabled and excitation is not None:
        total += excitation_field(excitation, t)
    if "cavity" in enabled and cavity is not None:
        total += cavity
    total[state.msat == 0] = 0.0
    return total
