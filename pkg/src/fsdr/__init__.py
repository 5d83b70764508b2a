"""Sufficient dimension reduction for functional data via distance covariance.

The package estimates the few direction functions through which a scalar
response depends on a functional predictor, by maximizing the sample
distance covariance between projected functional principal component scores
and the response. Dense curves use exact quadrature scores; sparse
longitudinal observations go through pooled local linear smoothers and
conditional-expectation scores.
"""

from .dcov import dcov_sq, dcov_sq_sform, double_center
from .errors import (
    BandwidthError,
    DataFormatError,
    DegenerateBasisError,
    FsdrError,
    GridMismatchError,
    InvalidRunError,
    NotOrthonormalError,
    NumericError,
    TruncationError,
)
from .fpca import (
    DenseFunctionalSample,
    EigenSystem,
    ScoreMatrix,
    eigen_decompose,
    exact_scores,
    fit_eigensystem,
    sample_covariance,
    sample_mean,
)
from .funcbase import (
    Curve,
    Grid,
    Kernel2D,
    gram_schmidt,
    hs_distance,
    hs_norm,
    inner_product,
    projection_kernel,
    weighted_inner_product,
)
from .pipeline import FitResult, fit_dense, fit_sparse
from .sdr import (
    BasisEstimate,
    CoefficientMatrix,
    DimensionSelection,
    SolverConfig,
    WhitenedScores,
    complete_orthobasis,
    select_dimension,
    sequential_fit,
    solve_single_index,
    whiten,
)
from .simlab import (
    ModelSpec,
    MonteCarloReport,
    estimation_error,
    gen_brownian,
    gen_model,
    run_monte_carlo,
    sparsify,
)
from .sparse import (
    Bandwidths,
    NoiseModel,
    SparseFunctionalSample,
    estimate_noise_variance,
    pace_scores,
    smooth_covariance,
    smooth_mean,
)

__version__ = "0.1.0"

__all__ = [
    "BandwidthError",
    "Bandwidths",
    "BasisEstimate",
    "CoefficientMatrix",
    "Curve",
    "DataFormatError",
    "DegenerateBasisError",
    "DenseFunctionalSample",
    "DimensionSelection",
    "EigenSystem",
    "FitResult",
    "FsdrError",
    "Grid",
    "GridMismatchError",
    "InvalidRunError",
    "Kernel2D",
    "ModelSpec",
    "MonteCarloReport",
    "NoiseModel",
    "NotOrthonormalError",
    "NumericError",
    "ScoreMatrix",
    "SolverConfig",
    "SparseFunctionalSample",
    "TruncationError",
    "WhitenedScores",
    "complete_orthobasis",
    "dcov_sq",
    "dcov_sq_sform",
    "double_center",
    "eigen_decompose",
    "estimate_noise_variance",
    "estimation_error",
    "exact_scores",
    "fit_dense",
    "fit_eigensystem",
    "fit_sparse",
    "gen_brownian",
    "gen_model",
    "gram_schmidt",
    "hs_distance",
    "hs_norm",
    "inner_product",
    "pace_scores",
    "projection_kernel",
    "run_monte_carlo",
    "sample_covariance",
    "sample_mean",
    "select_dimension",
    "sequential_fit",
    "smooth_covariance",
    "smooth_mean",
    "solve_single_index",
    "sparsify",
    "weighted_inner_product",
    "whiten",
]
