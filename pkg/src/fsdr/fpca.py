"""Functional PCA for densely observed curves.

Mean and covariance are the plain sample estimates; the eigenproblem is the
quadrature-weighted one, so eigenfunctions come out L2-orthonormal rather
than merely orthonormal as vectors. Truncation follows the fraction-of-
variance-explained rule with threshold ``fve_threshold``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from .errors import GridMismatchError, NumericError
from .funcbase import Curve, Grid, Kernel2D, inner_product, orient_positive

__all__ = [
    "DenseFunctionalSample",
    "EigenSystem",
    "ScoreMatrix",
    "sample_mean",
    "sample_covariance",
    "eigen_decompose",
    "exact_scores",
]


@dataclass(frozen=True)
class DenseFunctionalSample:
    """n curves observed on a shared grid, with optional scalar responses.

    ``curves`` is the n x p matrix whose rows are the subjects' sampled
    trajectories; ``responses`` may be None for predictor-only samples.
    """

    grid: Grid
    curves: np.ndarray
    responses: Optional[np.ndarray] = None

    def __post_init__(self):
        c = np.asarray(self.curves, dtype=float)
        if c.ndim != 2 or c.shape[0] < 2:
            raise ValueError("need an n x p matrix of curves with n >= 2")
        if c.shape[1] != len(self.grid):
            raise ValueError("curve rows must match the grid length")
        if not np.all(np.isfinite(c)):
            raise ValueError("curve values must be finite")
        object.__setattr__(self, "curves", c)
        if self.responses is not None:
            y = np.asarray(self.responses, dtype=float)
            if y.shape != (c.shape[0],):
                raise ValueError("responses must be a length-n vector")
            if not np.all(np.isfinite(y)):
                raise ValueError("responses must be finite")
            object.__setattr__(self, "responses", y)

    @property
    def n(self) -> int:
        return self.curves.shape[0]


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues, eigenfunctions, mean, and the retained truncation level.

    Eigenvalues are nonincreasing and nonnegative (negative numerical values
    are clamped to zero before construction and never counted toward the
    truncation level). Eigenfunctions are L2-orthonormal under the grid
    quadrature.
    """

    grid: Grid
    eigenvalues: np.ndarray
    eigenfunctions: list[Curve]
    mean: Curve
    num_components: int
    fve_threshold: float

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        if np.any(lam < 0):
            raise ValueError("eigenvalues must be nonnegative (clamp first)")
        if np.any(np.diff(lam) > 1e-12):
            raise ValueError("eigenvalues must be nonincreasing")
        if not 0 < self.fve_threshold <= 1:
            raise ValueError("fve_threshold must be in (0, 1]")
        if not 1 <= self.num_components <= np.count_nonzero(lam > 0):
            raise ValueError("num_components must not exceed the positive rank")
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def basis_matrix(self) -> np.ndarray:
        """p x D matrix with retained eigenfunctions as columns."""
        return np.column_stack(
            [f.values for f in self.eigenfunctions[: self.num_components]]
        )

    def reconstruct_covariance(self, rank: Optional[int] = None) -> Kernel2D:
        """Rank-truncated Mercer reconstruction sum_j lam_j phi_j(s) phi_j(t)."""
        r = self.num_components if rank is None else rank
        phi = np.column_stack([f.values for f in self.eigenfunctions[:r]])
        mat = (phi * self.eigenvalues[:r]) @ phi.T
        return Kernel2D(self.grid, mat)


@dataclass(frozen=True)
class ScoreMatrix:
    """n x D matrix of functional principal component scores."""

    scores: np.ndarray
    source: Literal["exact", "pace"]
    eigensystem: EigenSystem

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float)
        if s.ndim != 2:
            raise ValueError("scores must be an n x D matrix")
        if s.shape[1] != self.eigensystem.num_components:
            raise ValueError("score columns must match the truncation level")
        if not np.all(np.isfinite(s)):
            raise ValueError("scores must be finite")
        object.__setattr__(self, "scores", s)

    @property
    def n(self) -> int:
        return self.scores.shape[0]

    @property
    def num_components(self) -> int:
        return self.scores.shape[1]


def sample_mean(sample: DenseFunctionalSample) -> Curve:
    """Pointwise average curve."""
    return Curve(sample.grid, sample.curves.mean(axis=0))


def sample_covariance(sample: DenseFunctionalSample) -> Kernel2D:
    """Sample covariance kernel (1/n convention, centered at the sample mean)."""
    centered = sample.curves - sample.curves.mean(axis=0)
    mat = centered.T @ centered / sample.n
    return Kernel2D(sample.grid, 0.5 * (mat + mat.T))


def fve_truncation_level(eigenvalues: np.ndarray, threshold: float) -> int:
    """Smallest k whose leading eigenvalues reach the threshold fraction.

    The denominator is the total positive eigenvalue mass and the comparison
    is inclusive, so a cumulative fraction exactly at the threshold counts.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if not 0 < threshold <= 1:
        raise ValueError("threshold must be in (0, 1]")
    total = lam[lam > 0].sum()
    if total <= 0:
        raise NumericError("no positive eigenvalues")
    num_pos = int(np.count_nonzero(lam > 0))
    frac = np.cumsum(lam) / total
    return min(int(np.searchsorted(frac, threshold) + 1), num_pos)


def eigen_decompose(
    cov: Kernel2D,
    fve_threshold: float = 0.99,
    mean: Optional[Curve] = None,
) -> EigenSystem:
    """Solve the quadrature-weighted eigenproblem and truncate by FVE.

    The kernel is conjugated by the square-root quadrature weights so the
    symmetric matrix eigenproblem yields L2-orthonormal eigenfunctions after
    mapping back; on a uniform grid this reduces to scaled matrix PCA.
    Negative numerical eigenvalues are clamped to zero and excluded from the
    truncation level, whose rule is: the smallest k such that the leading k
    eigenvalues explain at least ``fve_threshold`` of the total positive
    eigenvalue mass.

    Parameters
    ----------
    cov : Kernel2D
        Symmetric covariance kernel.
    fve_threshold : float
        Fraction-of-variance-explained threshold in (0, 1].
    mean : Curve, optional
        Mean curve to attach to the eigensystem (zero curve if omitted).
    """
    if not 0 < fve_threshold <= 1:
        raise ValueError("fve_threshold must be in (0, 1]")
    if not cov.is_symmetric():
        raise NumericError("covariance kernel is not symmetric")
    grid = cov.grid
    sw = np.sqrt(grid.weights)
    m = sw[:, None] * cov.values * sw[None, :]
    lam, vec = np.linalg.eigh(0.5 * (m + m.T))
    lam = lam[::-1].copy()
    vec = vec[:, ::-1]
    lam[lam < 0] = 0.0
    if lam.sum() <= 0:
        raise NumericError("covariance kernel is numerically zero")
    num_pos = int(np.count_nonzero(lam > 0))
    num_components = fve_truncation_level(lam, fve_threshold)

    phi = vec / sw[:, None]
    funcs = [Curve(grid, orient_positive(phi[:, j].copy())) for j in range(num_pos)]
    mean_curve = mean if mean is not None else Curve(grid, np.zeros(len(grid)))
    if not mean_curve.grid.same_as(grid):
        raise GridMismatchError("mean curve lives on a different grid")
    return EigenSystem(
        grid=grid,
        eigenvalues=lam[:num_pos],
        eigenfunctions=funcs,
        mean=mean_curve,
        num_components=num_components,
        fve_threshold=fve_threshold,
    )


def fit_eigensystem(
    sample: DenseFunctionalSample, fve_threshold: float = 0.99
) -> EigenSystem:
    """Convenience: mean, covariance, and eigen-decomposition of a dense sample."""
    return eigen_decompose(
        sample_covariance(sample), fve_threshold, mean=sample_mean(sample)
    )


def exact_scores(sample: DenseFunctionalSample, es: EigenSystem) -> ScoreMatrix:
    """Scores by quadrature inner products of centered curves with eigenfunctions.

    Column j of the result is <X_i - mean, phi_j> for j = 1..D. With the mean
    taken as the sample mean, the score columns average to zero and their
    (1/n) sample covariance is exactly diag(eigenvalues).
    """
    if not sample.grid.same_as(es.grid):
        raise GridMismatchError("sample and eigensystem grids differ")
    centered = sample.curves - es.mean.values
    theta = (centered * sample.grid.weights) @ es.basis_matrix
    return ScoreMatrix(scores=theta, source="exact", eigensystem=es)
