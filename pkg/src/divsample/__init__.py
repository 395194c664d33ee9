"""Meaningfully diverse subsets of restoration candidates.

Subset selection (farthest point, K-means representatives, inverse-density
uniformization), heavy-tail diagnostics, an analytic Gaussian-mixture
diffusion testbed with diversity guidance, and hierarchical exploration
trees.
"""

__version__ = "0.1.0"

from .errors import DataError, DegenerateDataError, DivsampleError, UsageError
from .features import (
    DistanceMatrix,
    PcaModel,
    as_feature_matrix,
    load_features,
    pairwise_distance,
    pca_fit,
    pca_project,
)
from .guidance import (
    DiversityReport,
    GuidanceConfig,
    clamped_sq_l2,
    coverage_distance,
    diversity_guidance_step,
    mean_pairwise_distance,
    mode_coverage,
    nearest_neighbor_in_batch,
)
from .hierarchy import Node, build_tree, nearest_partition, tree_export, tree_from_json
from .subsample import (
    SelectionResult,
    UniformizationWeights,
    fps,
    kmeans_representatives,
    knn_density_weights,
    random_subset,
    uniformization,
    weighted_sample_without_replacement,
)
from .tailstats import (
    BaselineStats,
    KurtosisReport,
    TwoGaussianFit,
    first_pc_kurtosis,
    fit_two_gaussian_mixture_1d,
    gaussian_kurtosis_baseline,
    kurtosis,
)
from .toygmm import (
    DiffusionSchedule,
    GaussianMixture,
    InverseProblem,
    default_inverse_problem,
    diffused_gmm,
    gmm_logpdf,
    gmm_posterior,
    gmm_sample,
    linear_schedule,
    make_fig4_mixture,
    sample_batch,
    score,
    tweedie_x0,
)
