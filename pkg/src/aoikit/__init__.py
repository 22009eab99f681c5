"""aoikit: age-of-information analysis on finite-state Markov networks.

Declare a model (a finite chain plus symbolic age reset maps), then compute
exact stationary moments and moment generating functions of the age vector,
integrate its transient trajectories, and cross-check everything with a
discrete-event simulator.  Status-sampling line networks over general
renewal processes live in :mod:`aoikit.sampling`.
"""

__version__ = "0.1.0"

from .analytic import (
    MgfEvaluation,
    StationaryMoments,
    TransientTrajectory,
    mgf_radius,
    moments_via_mgf,
    stationary_mgf,
    stationary_moments,
    transient,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    MgfRadiusError,
    ModelValidationError,
    NonErgodicError,
    SingularMatrixError,
    TruncationError,
    UnstableModelError,
)
from .linalg import perron_root, solve_linear, spectral_abscissa, stationary_distribution
from .model import (
    FRESH,
    IDENTITY,
    AgeResetMap,
    BlockSystem,
    Copy,
    Fresh,
    Identity,
    ShsModel,
    Transition,
    assignment_matrices,
    build_block_system,
    mm11_abandonment,
    model_from_dict,
    model_to_dict,
    preemptive_line,
    validate,
)
from .sampling import (
    Exponential,
    Gamma,
    GaussianComparison,
    GridDensity,
    SamplingNetwork,
    SamplingSimResult,
    Uniform,
    equilibrium_age_pdf,
    gaussian_comparison,
    node_age_pdf,
    node_age_stats,
    renewal_age_moments,
    simulate_sampling_line,
)
from .simulate import EmpiricalHistogram, SimConfig, SimEstimates, empirical_distribution, simulate

__all__ = [
    "__version__",
    "AgeResetMap", "BlockSystem", "Copy", "Fresh", "Identity", "IDENTITY", "FRESH",
    "ShsModel", "Transition",
    "assignment_matrices", "build_block_system", "mm11_abandonment",
    "model_from_dict", "model_to_dict", "preemptive_line", "validate",
    "perron_root", "solve_linear", "spectral_abscissa", "stationary_distribution",
    "MgfEvaluation", "StationaryMoments", "TransientTrajectory",
    "mgf_radius", "moments_via_mgf", "stationary_mgf", "stationary_moments", "transient",
    "SimConfig", "SimEstimates", "EmpiricalHistogram", "empirical_distribution", "simulate",
    "Exponential", "Uniform", "Gamma", "GridDensity", "GaussianComparison",
    "SamplingNetwork", "SamplingSimResult",
    "equilibrium_age_pdf", "gaussian_comparison", "node_age_pdf", "node_age_stats",
    "renewal_age_moments", "simulate_sampling_line",
    "ConfigError", "ConvergenceError", "MgfRadiusError", "ModelValidationError",
    "NonErgodicError", "SingularMatrixError", "TruncationError", "UnstableModelError",
]
