"""Dicke-model reference: closed-form equilibrium results, the mapping onto a
single-cell engine, and an explicit spin + cavity ODE integrator.

All Dicke inputs are angular frequencies (rad/s); the coupling ``lam`` is the
collective coupling with hbar absorbed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .cavity import CavityParams
from .constants import GAMMA_LL, HBAR
from .errors import ConfigurationError
from .fields import MaterialParams
from .integrator import Engine
from .mesh import CellState, Mesh

_CRITICAL_RTOL = 1e-12


@dataclass
class DickeParams:
    omega_z: float
    omega_c: float
    lam: float
    s_total: float = 50.0
    kappa: float = 0.0

    def __post_init__(self):
        if not (self.omega_z > 0 and self.omega_c > 0):
            raise ConfigurationError("omega_z and omega_c must be positive")
        if self.lam < 0:
            raise ConfigurationError("lam must be non-negative")
        if not self.s_total > 0:
            raise ConfigurationError("s_total must be positive")
        if self.kappa < 0:
            raise ConfigurationError("kappa must be non-negative")

    @classmethod
    def from_ratio(cls, omega_z: float, omega_c: float, ratio: float, **kw) -> DickeParams:
        """Build with ``lam = ratio * lambda_c``."""
        return cls(omega_z, omega_c, ratio * math.sqrt(omega_z * omega_c) / 2, **kw)


def lambda_critical(p: DickeParams) -> float:
    return math.sqrt(p.omega_c * p.omega_z) / 2


def _is_critical(p: DickeParams) -> bool:
    return abs(p.lam - lambda_critical(p)) <= _CRITICAL_RTOL * lambda_critical(p)


class Equilibrium(NamedTuple):
    values: tuple[float, ...]
    critical: bool


def equilibrium_mx(p: DickeParams) -> Equilibrium:
    """Zero-temperature m_x: (0,) in the normal phase, (+v, -v) with
    v = sqrt(1 - mu^2), mu = (lambda_c/lam)^2, in the superradiant phase.

    Exactly at lambda_c the result is (0,) with ``critical`` set.
    """
    if _is_critical(p):
        return Equilibrium((0.0,), True)
    lc = lambda_critical(p)
    if p.lam < lc:
        return Equilibrium((0.0,), False)
    mu = (lc / p.lam) ** 2
    v = math.sqrt(1.0 - mu * mu)
    return Equilibrium((v, -v), False)


class Polaritons(NamedTuple):
    upper: float
    lower: float
    softened: bool


def polariton_frequencies(p: DickeParams) -> Polaritons:
    """Normal-mode frequencies (rad/s) of the linearized Dicke model.

    Normal phase:
        2 W^2 = wz^2 + wc^2 +- sqrt((wz^2 - wc^2)^2 + 16 lam^2 wz wc)
    Superradiant phase (mu = (lambda_c/lam)^2):
        2 W^2 = wz^2/mu^2 + wc^2 +- sqrt((wz^2/mu^2 - wc^2)^2 + 4 wz^2 wc^2)
    """
    wz, wc = p.omega_z, p.omega_c
    if _is_critical(p):
        upper = math.sqrt(wz * wz + wc * wc)
        return Polaritons(upper, 0.0, True)
    if p.lam < lambda_critical(p):
        a = wz * wz + wc * wc
        root = math.sqrt((wz * wz - wc * wc) ** 2 + 16 * p.lam**2 * wz * wc)
    else:
        mu = (lambda_critical(p) / p.lam) ** 2
        wz_eff2 = (wz / mu) ** 2
        a = wz_eff2 + wc * wc
        root = math.sqrt((wz_eff2 - wc * wc) ** 2 + 4 * wz * wz * wc * wc)
    upper = math.sqrt((a + root) / 2)
    lower = math.sqrt(max(a - root, 0.0) / 2)
    return Polaritons(upper, lower, False)


@dataclass
class DickeFields:
    b_ext: np.ndarray
    b_rms: np.ndarray
    msat: float
    cell_volume: float


def dicke_to_fields(p: DickeParams, gamma: float = GAMMA_LL, cell_volume: float = 1e-27,
                    hbar: float = HBAR) -> DickeFields:
    """Single-cell realization: B_ext = (0, 0, wz/gamma),
    B_rms = (sqrt(2/S) lam/gamma, 0, 0), Ms*Vc = hbar*gamma*S."""
    b_ext = np.array([0.0, 0.0, p.omega_z / gamma])
    b_rms = np.array([math.sqrt(2.0 / p.s_total) * p.lam / gamma, 0.0, 0.0])
    msat = hbar * gamma * p.s_total / cell_volume
    return DickeFields(b_ext, b_rms, msat, cell_volume)


def fields_to_dicke(b_ext_z: float, b_rms_x: float, msat: float, cell_volume: float,
                    gamma: float = GAMMA_LL, hbar: float = HBAR) -> tuple[float, float, float]:
    """Inverse of :func:`dicke_to_fields`: returns (omega_z, lam, s_total)."""
    s_total = msat * cell_volume / (hbar * gamma)
    return gamma * b_ext_z, gamma * b_rms_x * math.sqrt(s_total / 2.0), s_total


def tilted_direction(tilt_deg: float, toward: str = "y") -> np.ndarray:
    """Unit vector tilted ``tilt_deg`` from +z toward +x or +y."""
    th = math.radians(tilt_deg)
    v = np.array([0.0, 0.0, math.cos(th)])
    v["xy".index(toward)] = math.sin(th)
    return v


def build_dicke_engine(p: DickeParams, gilbert_alpha: float = 0.0, m0=None, *,
                       gamma: float = GAMMA_LL, cell_size: float = 1e-9, hbar: float = HBAR,
                       x0: float = 0.0, p0: float = 0.0) -> Engine:
    """Single-cell engine realizing ``p``.

    ``m0`` defaults to 1 degree from +z toward +y: the field-aligned (spin
    ground) state, nudged so the superradiant symmetry can break. A tilt
    toward y keeps the initial cavity overlap at zero.
    """
    mesh = Mesh(1, 1, 1, cell_size, cell_size, cell_size)
    f = dicke_to_fields(p, gamma=gamma, cell_volume=mesh.cell_volume, hbar=hbar)
    material = MaterialParams(msat=f.msat, alpha=gilbert_alpha, gamma=gamma)
    direction = tilted_direction(1.0) if m0 is None else m0
    state = CellState.uniform(mesh, f.msat, direction)
    cavity = CavityParams(omega_c=p.omega_c, kappa=p.kappa, b_rms=f.b_rms[None, :],
                          cell_volume=mesh.cell_volume, x0=x0, p0=p0, hbar=hbar)
    return Engine(mesh, state, material, enabled={"zeeman", "cavity"}, b_ext=f.b_ext,
                  cavity=cavity)


@dataclass
class OracleResult:
    t: np.ndarray
    spin: np.ndarray
    alpha: np.ndarray

    @property
    def m(self) -> np.ndarray:
        """Reduced magnetization; the moment is antiparallel to the spin."""
        return -self.spin


def integrate_explicit(p: DickeParams, spin0, alpha0: complex, dt: float, duration: float,
                       gilbert_alpha: float = 0.0, record_every: int = 1) -> OracleResult:
    """RK4 on the mean-field spin + cavity equations, cavity kept explicit.

    With s the unit spin and h = (sqrt(2/S) lam (alpha + alpha*), 0, wz):
        ds/dt     = -[s x h - a s x (s x h)] / (1 + a^2)
        dalpha/dt = -(i wc + kappa) alpha - i sqrt(2S) lam s_x
    """
    s = [float(v) for v in np.asarray(spin0, dtype=float).reshape(3)]
    norm = math.sqrt(sum(v * v for v in s))
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"initial spin must be a unit vector, |s| = {norm}")
    n_steps = int(math.floor(duration / dt + 1e-9))
    g_field = math.sqrt(2.0 / p.s_total) * p.lam
    g_drive = math.sqrt(2.0 * p.s_total) * p.lam
    decay = complex(p.kappa, p.omega_c)
    wz = p.omega_z
    a = gilbert_alpha
    pre = 1.0 / (1.0 + a * a)

    def rhs(sx, sy, sz, al):
        hx = g_field * 2.0 * al.real
        hz = wz
        # c = s x h with hy = 0
        cx = sy * hz
        cy = sz * hx - sx * hz
        cz = -sy * hx
        # d = s x c
        dx = sy * cz - sz * cy
        dy = sz * cx - sx * cz
        dz = sx * cy - sy * cx
        return (-pre * (cx - a * dx), -pre * (cy - a * dy), -pre * (cz - a * dz),
                -decay * al - 1j * g_drive * sx)

    n_rec = n_steps // record_every + 1
    ts = np.empty(n_rec)
    spins = np.empty((n_rec, 3))
    alphas = np.empty(n_rec, dtype=complex)
    sx, sy, sz = s
    al = complex(alpha0)
    ts[0], spins[0], alphas[0] = 0.0, (sx, sy, sz), al
    h = dt / 2
    k = 1
    for n in range(1, n_steps + 1):
        a1 = rhs(sx, sy, sz, al)
        a2 = rhs(sx + h * a1[0], sy + h * a1[1], sz + h * a1[2], al + h * a1[3])
        a3 = rhs(sx + h * a2[0], sy + h * a2[1], sz + h * a2[2], al + h * a2[3])
        a4 = rhs(sx + dt * a3[0], sy + dt * a3[1], sz + dt * a3[2], al + dt * a3[3])
        c = dt / 6
        sx += c * (a1[0] + 2 * a2[0] + 2 * a3[0] + a4[0])
        sy += c * (a1[1] + 2 * a2[1] + 2 * a3[1] + a4[1])
        sz += c * (a1[2] + 2 * a2[2] + 2 * a3[2] + a4[2])
        al += c * (a1[3] + 2 * a2[3] + 2 * a3[3] + a4[3])
        nrm = math.sqrt(sx * sx + sy * sy + sz * sz)
        sx, sy, sz = sx / nrm, sy / nrm, sz / nrm
        if n % record_every == 0:
            ts[k], spins[k], alphas[k] = n * dt, (sx, sy, sz), al
            k += 1
    return OracleResult(ts, spins, alphas)
