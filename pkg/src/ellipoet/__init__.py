"""POET covariance and precision estimation with sub-Gaussian and rank-based pilots."""

from .clime import (
    PrecisionEstimate,
    clime_column,
    clime_estimate,
    conditional_graph_estimate,
    precision_from_factor,
)
from .errors import (
    EstimationError,
    InfeasibleError,
    NotPositiveDefiniteError,
    RankDeficiencyError,
    SampleSizeError,
    SolverError,
)
from .kendall import (
    correlation_from_tau,
    kendall_tau_matrix,
    kendall_tau_pair,
    multivariate_kendall,
    sigma1_estimator,
)
from .pilot import PilotTriple, estimate_num_factors, pilot_elliptical, pilot_subgaussian
from .poet import PoetResult, ThresholdRule, adaptive_threshold, poet_estimate, rate_wn, residual_covariance
from .psd import psd_project
from .robust import MEstimatorConfig, alpha_for, m_location, robust_mean_vector, robust_variance_vector

__version__ = "0.1.0"
