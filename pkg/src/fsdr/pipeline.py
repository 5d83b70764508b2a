"""End-to-end fitting pipelines shared by the simulation lab and the CLI."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .fpca import (
    DenseFunctionalSample,
    EigenSystem,
    ScoreMatrix,
    eigen_decompose,
    exact_scores,
    fit_eigensystem,
)
from .funcbase import Grid
from .sdr import BasisEstimate, SolverConfig, sequential_fit
from .sparse import (
    Bandwidths,
    NoiseModel,
    SparseFunctionalSample,
    estimate_noise_variance,
    pace_scores,
    smooth_covariance,
    smooth_mean,
)

__all__ = ["FitResult", "fit_dense", "fit_sparse"]

# the noise-variance step uses a wider window than the surface smoother:
# its rotated diagonal fit is bias-protected, so variance wins the tradeoff
NOISE_BANDWIDTH_FACTOR = 2.0


@dataclass(frozen=True)
class FitResult:
    """Everything a fit produces, sufficient to serialize or predict."""

    basis: BasisEstimate
    scores: ScoreMatrix
    noise: Optional[NoiseModel] = None
    bandwidths: Optional[Bandwidths] = None

    @property
    def eigensystem(self) -> EigenSystem:
        return self.basis.eigensystem


def fit_dense(
    sample: DenseFunctionalSample,
    num_directions: int,
    seed: int = 0,
    config: SolverConfig | None = None,
    fve_threshold: float = 0.99,
) -> FitResult:
    """Dense pipeline: sample FPCA, exact scores, sequential direction fit."""
    if sample.responses is None:
        raise ValueError("fitting requires responses")
    es = fit_eigensystem(sample, fve_threshold)
    scores = exact_scores(sample, es)
    basis = sequential_fit(scores, sample.responses, num_directions, seed, config)
    return FitResult(basis=basis, scores=scores)


def fit_sparse(
    sample: SparseFunctionalSample,
    grid: Grid,
    num_directions: int,
    seed: int = 0,
    config: SolverConfig | None = None,
    fve_threshold: float = 0.99,
    bandwidths: Bandwidths | None = None,
) -> FitResult:
    """Sparse pipeline: pooled smoothers, conditional scores, direction fit."""
    if sample.responses is None:
        raise ValueError("fitting requires responses")
    bw = bandwidths or Bandwidths.rule_of_thumb(sample)
    mean = smooth_mean(sample, grid, bw.h_mu)
    cov = smooth_covariance(sample, mean, grid, bw.h_sigma)
    es = eigen_decompose(cov, fve_threshold, mean=mean)
    noise = estimate_noise_variance(
        sample, mean, cov, grid, h=min(NOISE_BANDWIDTH_FACTOR * bw.h_sigma, 0.45)
    )
    scores = pace_scores(sample, es, noise)
    basis = sequential_fit(scores, sample.responses, num_directions, seed, config)
    return FitResult(basis=basis, scores=scores, noise=noise, bandwidths=bw)
