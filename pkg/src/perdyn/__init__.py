"""perdyn: transient structural dynamics toolkit.

A damping-perturbation explicit time integrator with its convergence
and stability analysis, five baseline integrators, and a benchmark
harness producing error and cost studies.
"""

from .linalg import DivergenceError, neumann_sum, spectral_radius
from .model import (ModalData, StateVector, SystemModel, benchmark_beam,
                    benchmark_chain, build_beam, build_chain,
                    constant_step_force, damping_level,
                    gaussian_multiharmonic_force, modal_analysis)
from .per import (PerConfig, SchemeMatrices, Trajectory, assemble_series,
                  build_scheme, compute_a, compute_b_factors, force_samples,
                  integrate, integrate_asymptotic)
from .analysis import (DtBound, SigmaEigen, StabilityRecord, beta_radius_map,
                       dt_bound, sdof_stability_map, sigma_eigenvalues,
                       tau_limit)
from .baselines import (IntegratorParams, StateSpaceSystem, bathe, mpim,
                        newmark, rk4, state_space, wilson)
from .bench import (CostModel, ErrorReport, cost_mpim, cost_per, cost_rk4,
                    global_error, reference_solution, run_method, sweep_damping,
                    sweep_dt, timing_run)

__version__ = "0.1.0"

__all__ = [
    "DivergenceError", "neumann_sum", "spectral_radius",
    "ModalData", "StateVector", "SystemModel", "benchmark_beam",
    "benchmark_chain", "build_beam", "build_chain", "constant_step_force",
    "damping_level", "gaussian_multiharmonic_force", "modal_analysis",
    "PerConfig", "SchemeMatrices", "Trajectory", "assemble_series",
    "build_scheme", "compute_a", "compute_b_factors", "force_samples",
    "integrate", "integrate_asymptotic",
    "DtBound", "SigmaEigen", "StabilityRecord", "beta_radius_map", "dt_bound",
    "sdof_stability_map", "sigma_eigenvalues", "tau_limit",
    "IntegratorParams", "StateSpaceSystem", "bathe", "mpim", "newmark", "rk4",
    "state_space", "wilson",
    "CostModel", "ErrorReport", "cost_mpim", "cost_per", "cost_rk4",
    "global_error", "reference_solution", "run_method", "sweep_damping",
    "sweep_dt", "timing_run",
]
