"""Finite-difference micromagnetics with a single-mode cavity integrated out
into a retarded memory field, plus a Dicke-model reference."""

from .analysis import (ResponseMap, Spectrum, Splitting, extract_splitting, fft_spectrum,
                       find_peaks, irms_from_circuit, sweep)
from .cavity import (CavityParams, MemoryAccumulators, gamma, reconstruct_alpha, update_memory,
                     weighted_overlap)
from .config import SimConfig, build_engine, load_config, parse_config
from .dicke import (DickeParams, build_dicke_engine, equilibrium_mx, integrate_explicit,
                    lambda_critical, polariton_frequencies)
from .errors import CavimagError, ConfigurationError
from .fields import ExcitationSpec, MaterialParams, effective_field
from .integrator import Engine, RunConfig, TimeSeries, run, step_rk4
from .mesh import CellState, Mesh, average_magnetization
from .ovf import OvfDocument, OvfError, parse_ovf, write_ovf

__version__ = "0.1.0"

__all__ = [
    "CavimagError", "CavityParams", "CellState", "ConfigurationError", "DickeParams", "Engine",
    "ExcitationSpec", "MaterialParams", "MemoryAccumulators", "Mesh", "OvfDocument", "OvfError",
    "ResponseMap", "RunConfig", "SimConfig", "Spectrum", "Splitting", "TimeSeries",
    "average_magnetization", "build_dicke_engine", "build_engine", "effective_field",
    "equilibrium_mx", "extract_splitting", "fft_spectrum", "find_peaks", "gamma",
    "integrate_explicit", "irms_from_circuit", "lambda_critical", "load_config", "parse_config",
    "polariton_frequencies", "reconstruct_alpha", "run", "step_rk4", "sweep", "update_memory",
    "weighted_overlap", "write_ovf", "parse_ovf",
]
