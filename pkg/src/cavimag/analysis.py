"""Spectra of recorded magnetization, peak finding, parameter sweeps and
anticrossing extraction."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .constants import HBAR
from .integrator import Engine, RunConfig, run

log = logging.getLogger(__name__)

SWEEP_AXES = ("omega_c", "b_ext_z", "lambda")


@dataclass
class Spectrum:
    frequencies: np.ndarray  # rad/s
    amplitudes: np.ndarray
    resolution: float  # rad/s


def fft_spectrum(t, values, window: str = "none") -> Spectrum:
    """|DFT| of a uniformly sampled, mean-subtracted series over positive frequencies.

    The bin spacing is ``2*pi / (N*dt)``.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(values, dtype=float)
    if t.shape != x.shape or t.ndim != 1:
        raise ValueError("t and values must be 1-D arrays of equal length")
    if t.size < 8:
        raise ValueError(f"need at least 8 samples, got {t.size}")
    steps = np.diff(t)
    dt = (t[-1] - t[0]) / (t.size - 1)
    if not dt > 0 or np.max(np.abs(steps - dt)) > 1e-9 * dt:
        raise ValueError("samples are not uniformly spaced")
    x = x - x.mean()
    if window == "hann":
        x = x * np.hanning(x.size)
    elif window != "none":
        raise ValueError(f"unknown window {window!r}")
    amp = np.abs(np.fft.rfft(x))
    freqs = 2 * math.pi * np.fft.rfftfreq(x.size, dt)
    return Spectrum(freqs, amp, 2 * math.pi / (x.size * dt))


class Peak(NamedTuple):
    frequency: float
    amplitude: float


def find_peaks(spec: Spectrum, min_prominence: float = 0.1) -> list[Peak]:
    """Local maxima above ``min_prominence * max(amplitude)``, refined by a
    parabola through the log-amplitudes of the three bins around each maximum.
    """
    a = np.asarray(spec.amplitudes, dtype=float)
    if a.size == 0:
        raise ValueError("empty spectrum")
    top = a.max()
    if not top > 0 or a.size < 3:
        return []
    floor = min_prominence * top
    inner = a[1:-1]
    hits = np.nonzero((inner > a[:-2]) & (inner >= a[2:]) & (inner >= floor))[0] + 1
    step = spec.frequencies[1] - spec.frequencies[0]
    peaks = []
    for i in hits:
        lo, mid, hi = a[i - 1], a[i], a[i + 1]
        shift, height = 0.0, mid
        if lo > 0 and hi > 0:
            la, lb, lc = math.log(lo), math.log(mid), math.log(hi)
            den = la - 2 * lb + lc
            if den < 0:
                shift = 0.5 * (la - lc) / den
                height = math.exp(lb - 0.25 * (la - lc) * shift)
        peaks.append(Peak(float(spec.frequencies[i] + shift * step), float(height)))
    return peaks


@dataclass
class ResponseMap:
    axis: str
    values: np.ndarray
    frequencies: np.ndarray
    amplitudes: np.ndarray  # (len(values), len(frequencies)); NaN rows for failed points
    resolution: float
    failed: dict[int, str] = field(default_factory=dict)

    def write_csv(self, path) -> None:
        """First row: frequency grid; first column: parameter values."""
        with open(path, "w") as fh:
            fh.write(",".join([self.axis] + [format(f, ".16e") for f in self.frequencies]) + "\n")
            for v, row in zip(self.values, self.amplitudes):
                fh.write(",".join([format(v, ".16e")] + [format(a, ".16e") for a in row]) + "\n")


def read_response_map_csv(path) -> ResponseMap:
    with open(path) as fh:
        lines = [ln.rstrip("\n").split(",") for ln in fh if ln.strip()]
    axis = lines[0][0]
    freqs = np.array([float(v) for v in lines[0][1:]])
    values = np.array([float(r[0]) for r in lines[1:]])
    amps = np.array([[float(v) for v in r[1:]] for r in lines[1:]]).reshape(len(values), freqs.size)
    res = float(freqs[1] - freqs[0]) if freqs.size > 1 else float("nan")
    failed = {i: "nan row" for i, row in enumerate(amps) if np.all(np.isnan(row))}
    return ResponseMap(axis, values, freqs, amps, res, failed)


EngineFactory = Callable[[str, float], Engine]


def sweep(factory: EngineFactory, axis: str, values: Sequence[float], config: RunConfig,
          component: str = "x", window: str = "none") -> ResponseMap:
    """Run one simulation per value and stack the spectra of the recorded
    average magnetization component. A failing point leaves a NaN row and is
    listed in ``failed``; the sweep carries on."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    values = np.asarray(list(values), dtype=float)
    n_samples = config.n_steps // config.record_every + 1
    dt = config.dt * config.record_every
    freqs = 2 * math.pi * np.fft.rfftfreq(n_samples, dt)
    amps = np.full((values.size, freqs.size), np.nan)
    failed: dict[int, str] = {}
    for i, v in enumerate(values):
        try:
            series = run(factory(axis, float(v)), config)
            spec = fft_spectrum(series.t, series.component(component), window=window)
            amps[i] = spec.amplitudes
        except Exception as exc:  # record and continue
            failed[i] = f"{type(exc).__name__}: {exc}"
            log.warning("sweep point %s=%g failed: %s", axis, v, failed[i])
    return ResponseMap(axis, values, freqs, amps, 2 * math.pi / (n_samples * dt), failed)


@dataclass
class Splitting:
    two_g: float  # rad/s; an upper bound when not resolved
    at_value: float
    resolved: bool
    gaps: np.ndarray  # per row, NaN where fewer than two peaks


def _two_peaks(spec: Spectrum, min_prominence: float) -> tuple[float, float] | None:
    peaks = find_peaks(spec, min_prominence)
    if len(peaks) < 2:
        return None
    best = sorted(peaks, key=lambda p: p.amplitude, reverse=True)[:2]
    lo, hi = sorted(p.frequency for p in best)
    return lo, hi


def extract_splitting(rmap: ResponseMap, min_prominence: float = 0.05) -> Splitting:
    """Smallest gap between the two strongest peaks over the swept parameter.

    A row showing a single peak between rows that show two means the branches
    merged below resolution; the result is then flagged unresolved.
    """
    n = rmap.values.size
    if n < 3:
        raise ValueError(f"need at least 3 parameter points, got {n}")
    order = np.argsort(rmap.values)
    gaps = np.full(n, np.nan)
    n_peaks = np.zeros(n, dtype=int)
    for i in range(n):
        row = rmap.amplitudes[i]
        if np.any(np.isnan(row)):
            continue
        spec = Spectrum(rmap.frequencies, row, rmap.resolution)
        n_peaks[i] = len(find_peaks(spec, min_prominence))
        pair = _two_peaks(spec, min_prominence)
        if pair is not None:
            gaps[i] = pair[1] - pair[0]
    if np.all(np.isnan(gaps)):
        raise ValueError("no parameter point shows two peaks; nothing to split")
    two_rows = [k for k, i in enumerate(order) if not np.isnan(gaps[i])]
    merged = [order[k] for k in range(two_rows[0] + 1, two_rows[-1])
              if n_peaks[order[k]] == 1]
    if merged:
        log.info("branches merge at %s=%g; splitting below resolution", rmap.axis,
                 rmap.values[merged[0]])
        return Splitting(rmap.resolution, float(rmap.values[merged[0]]), False, gaps)
    best = int(np.nanargmin(gaps))
    return Splitting(float(gaps[best]), float(rmap.values[best]), True, gaps)


def irms_from_circuit(omega0: float, z0: float, hbar: float = HBAR) -> float:
    """Zero-point current at a resonator antinode, omega0 * sqrt(hbar*pi / (4*Z0)), in A."""
    if not (omega0 > 0 and z0 > 0 and hbar > 0):
        raise ValueError("omega0, z0 and hbar must be positive")
    return omega0 * math.sqrt(hbar * math.pi / (4 * z0))
