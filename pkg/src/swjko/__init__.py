"""Sliced-Wasserstein JKO gradient flows on grids and particle clouds."""

__version__ = "0.1.0"

from .errors import CapabilityError, FlowAborted, InvalidArgument, NumericDomainError
from .measures import (
    GaussianMeasure,
    GridMeasure,
    ParticleCloud,
    ProjectionSet,
    derive_seed,
    make_rng,
    project_1d,
    random_spd_matrix,
    sample_gaussian,
    sample_unit_sphere,
)
from .sliced import (
    QuantileGrid,
    SwEstimate,
    grad_sw2_positions,
    grad_sw2_weights,
    sliced_wasserstein,
    sw2_gaussian_isotropic,
    sw2_mc,
    w2_1d_exact,
    w2_1d_quantile,
    w2_1d_uniform_sorted,
    w2_gaussian_bures,
)
from .solver import SolverConfig, Trajectory, direct_minimize, energy_gap_check, run_flow, simplex_project, sw_jko_step

__all__ = [name for name in dir() if not name.startswith("_")]
