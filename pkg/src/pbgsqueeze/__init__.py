"""Nonclassical light from a chi(2) planar waveguide with a photonic band-gap corrugation."""

from .model import (
    MODES,
    BoundaryConditions,
    ConfigurationError,
    InputState,
    WaveguideParams,
    input_anti_normal_coefficients,
    regauge,
    validate,
)
from .mean_field import BVPError, BVPOptions, MeanFieldSolution, linear_solution, solve_bvp
from .fluctuation import FluctuationError, input_output_matrix, propagate_basis, to_input_output, verify_signature
from .quantum_stats import evaluate, observable_names, output_coefficients
from .config import ScanSpec, load, loads
from .scan_engine import ScanResult, run_scan
from .recipes import emit_figure_recipe

__all__ = [
    "MODES",
    "BoundaryConditions",
    "ConfigurationError",
    "InputState",
    "WaveguideParams",
    "input_anti_normal_coefficients",
    "regauge",
    "validate",
    "BVPError",
    "BVPOptions",
    "MeanFieldSolution",
    "linear_solution",
    "solve_bvp",
    "FluctuationError",
    "input_output_matrix",
    "propagate_basis",
    "to_input_output",
    "verify_signature",
    "evaluate",
    "observable_names",
    "output_coefficients",
    "ScanSpec",
    "load",
    "loads",
    "ScanResult",
    "run_scan",
    "emit_figure_recipe",
]

__version__ = "0.1.0"
