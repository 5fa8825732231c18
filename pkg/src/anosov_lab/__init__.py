"""Spherical billiards, their Riccati certificates and the surfaces of
revolution assembled from them."""
from .billiard import next_collision, reflect, simulate
from .dynamics import (anosov_certificate, euclidean_tube_bound, integrate_geodesic,
                       jacobi_along, lyapunov_estimate)
from .horizon import horizon
from .mesh import export_mesh, gauss_bonnet_integral
from .pipelines import ExperimentConfig, run_pipeline
from .riccati import analytic_certificate, free_flight_riccati, sampled_certificate
from .sphere import BilliardTable, SphericalCircle, TangentState, validate_table
from .surface import build_sigma, flatten, verify_assumptions
from .tables import gen_platonic_table

__version__ = "0.1.0"

__all__ = [
    "BilliardTable", "ExperimentConfig", "SphericalCircle", "TangentState",
    "analytic_certificate", "anosov_certificate", "build_sigma", "euclidean_tube_bound",
    "export_mesh", "flatten", "free_flight_riccati", "gauss_bonnet_integral",
    "gen_platonic_table", "horizon", "integrate_geodesic", "jacobi_along",
    "lyapunov_estimate", "next_collision", "reflect", "run_pipeline", "sampled_certificate",
    "simulate", "validate_table", "verify_assumptions",
]
