"""Boundary-hitting statistics of a diffusion with a decaying drive.

The state X lives on [0,1] and mean-reverts toward a level set by a drive
Z that decays logistically, optionally fed back through the solved value
itself. The package computes V(x, z) = E[f(Z at hit) * exp(-eta * tau)],
the discounted payoff collected when X first reaches 1, two independent
ways: a degenerate-elliptic grid solver (monotone and filtered variants)
and direct path simulation.
"""

from .analysis import (ConvergenceRow, MonotonicityReport, convergence_rows,
                       monotonicity_report, norms, probe, rates)
from .fd import (ConvergenceError, FieldGrid, Grid, RowCoefficients,
                 SchemeConfig, SolveReport, assemble, gamma_num, lambda_term,
                 solve, solve_from, solve_linear_direct)
from .mc import (FieldOmegaSource, McConfig, McEstimate, PathBatch,
                 PathOutcome, estimate_V, field_omega_source, simulate_batch,
                 simulate_jacobi, simulate_path, step)
from .model import (BoundarySpec, ModelParams, OmegaSpec, boundary_f,
                    diffusion, drift, exact_Z, fichera, omega_bar,
                    omega_eval, rho)

__version__ = "0.1.0"

__all__ = [
    "BoundarySpec", "ConvergenceError", "ConvergenceRow", "FieldGrid",
    "FieldOmegaSource", "Grid", "McConfig", "McEstimate", "ModelParams",
    "MonotonicityReport", "OmegaSpec", "PathBatch", "PathOutcome",
    "RowCoefficients", "SchemeConfig", "SolveReport", "assemble",
    "boundary_f", "convergence_rows", "diffusion", "drift", "estimate_V",
    "exact_Z", "fichera", "field_omega_source", "gamma_num", "lambda_term",
    "monotonicity_report", "norms", "omega_bar", "omega_eval", "probe",
    "rates", "rho", "simulate_batch", "simulate_jacobi", "simulate_path",
    "solve", "solve_from", "solve_linear_direct", "step",
]
