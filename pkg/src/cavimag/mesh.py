"""Orthorhombic finite-difference mesh and per-cell magnetization state.

Cells are addressed by a linear index ``i = x + nx*(y + ny*z)`` (x fastest),
the same node ordering OVF files use. Vector quantities on the mesh are
``(n_cells, 3)`` float64 arrays; this module calls them field maps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

FieldMap = np.ndarray


@dataclass(frozen=True)
class Mesh:
    nx: int
    ny: int
    nz: int
    dx: float
    dy: float
    dz: float
    cell_volume: float = field(init=False)

    def __post_init__(self):
        for name in ("nx", "ny", "nz"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        for name in ("dx", "dy", "dz"):
            value = float(getattr(self, name))
            if not value > 0 or not np.isfinite(value):
                raise ConfigurationError(f"{name} must be positive, got {value!r}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "cell_volume", self.dx * self.dy * self.dz)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def shape(self) -> tuple[int, int, int]:
        """Array shape ``(nz, ny, nx)`` matching the linear index order."""
        return (self.nz, self.ny, self.nx)

    @property
    def cellsize(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dz)

    def index(self, x: int, y: int, z: int) -> int:
        if not (0 <= x < self.nx and 0 <= y < self.ny and 0 <= z < self.nz):
            raise IndexError(f"cell ({x}, {y}, {z}) outside {self.nx}x{self.ny}x{self.nz} mesh")
        return x + self.nx * (y + self.ny * z)

    def coords(self, i: int) -> tuple[int, int, int]:
        if not 0 <= i < self.n_cells:
            raise IndexError(f"linear index {i} outside mesh of {self.n_cells} cells")
        x = i % self.nx
        y = (i // self.nx) % self.ny
        z = i // (self.nx * self.ny)
        return x, y, z

    def centers(self) -> np.ndarray:
        """Cell-center positions, shape ``(n_cells, 3)``, in meters."""
        z, y, x = np.meshgrid(
            np.arange(self.nz), np.arange(self.ny), np.arange(self.nx), indexing="ij"
        )
        pos = np.stack([(x + 0.5) * self.dx, (y + 0.5) * self.dy, (z + 0.5) * self.dz], axis=-1)
        return pos.reshape(-1, 3)


def new_mesh(nx: int, ny: int, nz: int, dx: float, dy: float, dz: float) -> Mesh:
    return Mesh(nx, ny, nz, dx, dy, dz)


@dataclass
class CellState:
    """Reduced magnetization ``m`` (unit vectors) and saturation magnetization
    ``msat`` (A/m) per cell. ``msat == 0`` marks vacuum, where ``m`` is zero."""

    m: np.ndarray
    msat: np.ndarray

    @classmethod
    def uniform(cls, mesh: Mesh, msat: float, direction=(0.0, 0.0, 1.0)) -> CellState:
        if msat < 0:
            raise ConfigurationError(f"msat must be non-negative, got {msat}")
        state = cls(np.zeros((mesh.n_cells, 3)), np.full(mesh.n_cells, float(msat)))
        if msat > 0:
            set_uniform(state, direction)
        return state

    @property
    def magnetic(self) -> np.ndarray:
        return self.msat > 0

    @property
    def n_magnetic(self) -> int:
        return int(np.count_nonzero(self.msat > 0))

    def copy(self) -> CellState:
        return CellState(self.m.copy(), self.msat.copy())

    def normalize(self) -> None:
        """Project every magnetic cell back onto the unit sphere; zero vacuum."""
        norm = np.sqrt(np.einsum("ij,ij->i", self.m, self.m))
        mag = self.msat > 0
        if np.any(norm[mag] == 0):
            raise ValueError("magnetic cell with zero magnetization vector")
        self.m[mag] /= norm[mag, None]
        self.m[~mag] = 0.0

    def norm_drift(self) -> float:
        """max | |m_i| - 1 | over magnetic cells."""
        mag = self.msat > 0
        if not np.any(mag):
            return 0.0
        norm = np.sqrt(np.einsum("ij,ij->i", self.m[mag], self.m[mag]))
        return float(np.max(np.abs(norm - 1.0)))


def _unit(direction) -> np.ndarray:
    v = np.asarray(direction, dtype=float).reshape(3)
    n = np.linalg.norm(v)
    if not n > 0 or not np.isfinite(n):
        raise ValueError(f"direction must be a finite nonzero vector, got {tuple(v)}")
    return v / n


def set_uniform(state: CellState, direction) -> None:
    u = _unit(direction)
    mag = state.msat > 0
    state.m[mag] = u
    state.m[~mag] = 0.0


def average_magnetization(state: CellState) -> np.ndarray:
    """Mean of ``m`` over magnetic cells, summed in linear-index order."""
    mag = state.msat > 0
    count = int(np.count_nonzero(mag))
    if count == 0:
        raise ValueError("no magnetic cells to average over")
    # offsets from the first magnetic row: a uniform state averages exactly,
    # and np.add.reduce over a fixed-shape array keeps the order deterministic
    ref = state.m[int(np.argmax(mag))]
    dev = np.where(mag[:, None], state.m - ref, 0.0)
    return ref + np.add.reduce(dev, axis=0) / count


def set_disc_geometry(state: CellState, mesh: Mesh, radius: float, msat: float) -> None:
    """Keep a disc (cylinder along z) centered in the xy-plane; vacuum elsewhere.

    Newly magnetic cells that were vacuum start along +z.
    """
    limit = min(mesh.nx * mesh.dx, mesh.ny * mesh.dy) / 2
    if radius < 0 or radius > limit * (1 + 1e-12):
        raise ConfigurationError(f"disc radius {radius} outside [0, {limit}]")
    pos = mesh.centers()
    cx = mesh.nx * mesh.dx / 2
    cy = mesh.ny * mesh.dy / 2
    inside = (pos[:, 0] - cx) ** 2 + (pos[:, 1] - cy) ** 2 <= radius**2
    was_vacuum = state.msat == 0
    state.msat[:] = np.where(inside, float(msat), 0.0)
    fresh = inside & was_vacuum
    state.m[fresh] = (0.0, 0.0, 1.0)
    state.m[~inside] = 0.0


def seed_vortex(state: CellState, mesh: Mesh, polarity: int = 1, chirality: int = 1,
                core_radius: float | None = None) -> None:
    """Analytic vortex seed: in-plane curl with an out-of-plane core."""
    pos = mesh.centers()
    x = pos[:, 0] - mesh.nx * mesh.dx / 2
    y = pos[:, 1] - mesh.ny * mesh.dy / 2
    r = np.hypot(x, y)
    rc = core_radius if core_radius is not None else 2 * max(mesh.dx, mesh.dy)
    mz = polarity * np.exp(-(r / rc) ** 2)
    inplane = np.sqrt(np.clip(1 - mz**2, 0.0, None))
    with np.errstate(invalid="ignore", divide="ignore"):
        ux = np.where(r > 0, -y / r, 0.0)
        uy = np.where(r > 0, x / r, 0.0)
    state.m[:, 0] = chirality * inplane * ux
    state.m[:, 1] = chirality * inplane * uy
    state.m[:, 2] = mz
    state.m[state.msat == 0] = 0.0
    state.normalize()
