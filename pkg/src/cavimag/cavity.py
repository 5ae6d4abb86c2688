"""Single-mode cavity folded into a retarded field ``B_cav = B_rms * Gamma(t)``.

With the overlap ``w(t) = sum_i Ms_i m_i(t) . B_rms(r_i)`` the memory term is

    Gamma(t) = exp(-kappa t) [cos(wc t) (x0 - 2Vc/hbar S(t))
                              - sin(wc t) (p0 - 2Vc/hbar C(t))]

where S and C are running integrals of ``exp(kappa tau) sin|cos(wc tau) w(tau)``
accumulated with the right-endpoint rule, one term per accepted step.

The sums are stored rescaled, ``S_hat_n = exp(-kappa t_n) S_n``, and updated as
``S_hat_n = exp(-kappa dt) S_hat_{n-1} + sin(wc t_n) w_n dt``. This is the same
sequence without the unbounded ``exp(kappa t)`` factor.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .constants import HBAR, KAPPA_T_OVERFLOW
from .errors import ConfigurationError
from .mesh import CellState, FieldMap, Mesh


@dataclass
class CavityParams:
    omega_c: float
    kappa: float
    b_rms: FieldMap
    cell_volume: float
    x0: float = 0.0
    p0: float = 0.0
    hbar: float = HBAR

    def __post_init__(self):
        if not self.omega_c > 0:
            raise ConfigurationError(f"omega_c must be positive, got {self.omega_c}")
        if self.kappa < 0:
            raise ConfigurationError(f"kappa must be non-negative, got {self.kappa}")
        if not self.cell_volume > 0:
            raise ConfigurationError("cell_volume must be positive")
        self.b_rms = np.asarray(self.b_rms, dtype=float)
        if self.b_rms.ndim != 2 or self.b_rms.shape[1] != 3:
            raise ConfigurationError(f"b_rms must have shape (n_cells, 3), got {self.b_rms.shape}")

    @property
    def alpha0(self) -> complex:
        """Initial cavity amplitude, with x0 = 2 Re(alpha0) and p0 = -2 Im(alpha0)."""
        return complex(self.x0, -self.p0) / 2

    @property
    def coupling(self) -> float:
        """2 Vc / hbar, the prefactor of the memory sums."""
        return 2.0 * self.cell_volume / self.hbar


@dataclass
class MemoryAccumulators:
    s_hat: float = 0.0
    c_hat: float = 0.0
    t_last: float = 0.0
    n: int = 0
    _warned: bool = False

    def unscaled(self, kappa: float) -> tuple[float, float]:
        """The sums (S_n, C_n) as written without rescaling; overflows for large kappa*t."""
        with np.errstate(over="ignore"):
            g = float(np.exp(kappa * self.t_last))
        return g * self.s_hat, g * self.c_hat


def weighted_overlap(state: CellState, b_rms: FieldMap, mesh: Mesh) -> float:
    """sum_i Ms_i m_i . B_rms(r_i) in A·T/m, vacuum cells contributing zero."""
    b_rms = np.asarray(b_rms)
    if b_rms.shape != (mesh.n_cells, 3) or state.m.shape != (mesh.n_cells, 3):
        raise ConfigurationError(
            f"b_rms shape {b_rms.shape} does not match mesh of {mesh.n_cells} cells"
        )
    per_cell = state.msat * np.einsum("ij,ij->i", state.m, b_rms)
    return float(np.add.reduce(per_cell))


def update_memory(acc: MemoryAccumulators, overlap: float, t_n: float, dt: float,
                  params: CavityParams) -> None:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    expected = acc.t_last + dt
    if abs(t_n - expected) > 1e-15 * abs(t_n):
        raise ValueError(
            f"memory update at t={t_n!r} does not follow t_last={acc.t_last!r} by dt={dt!r}"
        )
    kappa = params.kappa
    if kappa * t_n > KAPPA_T_OVERFLOW and not acc._warned:
        acc._warned = True
        warnings.warn(
            f"kappa*t = {kappa * t_n:.1f} exceeds {KAPPA_T_OVERFLOW:g}: the un-rescaled "
            "memory sums would overflow; continuing with the rescaled accumulators",
            RuntimeWarning,
            stacklevel=2,
        )
    decay = math.exp(-kappa * dt)
    phase = params.omega_c * t_n
    acc.s_hat = decay * acc.s_hat + math.sin(phase) * overlap * dt
    acc.c_hat = decay * acc.c_hat + math.cos(phase) * overlap * dt
    acc.t_last = t_n
    acc.n += 1


def gamma(acc: MemoryAccumulators, t: float, params: CavityParams) -> float:
    """Memory factor at cavity time ``t >= acc.t_last``.

    For ``t > t_last`` (integrator stages) the sums are frozen at t_last and
    only the oscillating prefactors move to ``t``.
    """
    if t < acc.t_last:
        raise ValueError(f"Gamma requested at t={t} before last update t={acc.t_last}")
    k = params.coupling
    lag = math.exp(-params.kappa * (t - acc.t_last))
    env = math.exp(-params.kappa * t)
    cos_t = math.cos(params.omega_c * t)
    sin_t = math.sin(params.omega_c * t)
    return (
        env * (cos_t * params.x0 - sin_t * params.p0)
        - k * lag * (cos_t * acc.s_hat - sin_t * acc.c_hat)
    )


def cavity_field(acc: MemoryAccumulators, t: float, params: CavityParams) -> FieldMap:
    return params.b_rms * gamma(acc, t, params)


def reset_memory(acc: MemoryAccumulators) -> None:
    """Treat the current magnetization as the moment the cavity couples (t = 0)."""
    acc.s_hat = 0.0
    acc.c_hat = 0.0
    acc.t_last = 0.0
    acc.n = 0
    acc._warned = False


def reconstruct_alpha(times, overlaps, params: CavityParams) -> np.ndarray:
    """Cavity amplitude alpha(t_k) recovered from a recorded overlap series.

    alpha(t) = alpha0 e^{-(kappa + i wc) t}
               + i Vc/hbar * int_0^t e^{(kappa + i wc)(tau - t)} w(tau) dtau

    The integral uses the trapezoid rule between consecutive samples, carried
    forward recursively so no growing exponential is formed. Photon number is
    ``abs(alpha)**2``.
    """
    t = np.asarray(times, dtype=float)
    w = np.asarray(overlaps, dtype=float)
    if t.size == 0:
        raise ValueError("empty overlap series")
    if t.shape != w.shape:
        raise ValueError("times and overlaps must have the same length")
    if t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise ValueError("times must start at 0 and increase strictly")
    z = complex(params.kappa, params.omega_c)
    a0 = params.alpha0
    pref = 1j * params.cell_volume / params.hbar
    out = np.empty(t.size, dtype=complex)
    integral = 0j
    out[0] = a0
    for k in range(1, t.size):
        h = t[k] - t[k - 1]
        prop = cmath.exp(-z * h)
        integral = prop * integral + 0.5 * h * (prop * w[k - 1] + w[k])
        out[k] = a0 * cmath.exp(-z * t[k]) + pref * integral
    return out
