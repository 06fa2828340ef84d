"""Scattering data, bound states and the first trace formula for 1-D Schrodinger operators."""

from .potential import Potential, PotentialError, PotentialFileError
from .jost import SpectralParam, JostField, kernel_D, solve_m
from .scattering import GridSpec, ScatteringData, coeff_a, coeff_b, scattering_on_grid
from .spectrum import BoundStateSeq, find_bound_states, lieb_thirring_check
from .blaschke import BlaschkeSeq, blaschke_eval
from .trace import TraceReport, trace_formula, poisson_schwarz_check

__version__ = "0.1.0"

__all__ = [
    "Potential", "PotentialError", "PotentialFileError",
    "SpectralParam", "JostField", "kernel_D", "solve_m",
    "GridSpec", "ScatteringData", "coeff_a", "coeff_b", "scattering_on_grid",
    "BoundStateSeq", "find_bound_states", "lieb_thirring_check",
    "BlaschkeSeq", "blaschke_eval",
    "TraceReport", "trace_formula", "poisson_schwarz_check",
]
