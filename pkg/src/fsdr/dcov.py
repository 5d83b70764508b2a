"""Sample distance covariance with double-centering and a brute-force oracle.

``dcov_sq`` is the production statistic (vectorized, O(n^2) memory).
``dcov_sq_sform`` recomputes the same number from the algebraic identity
S1 + S2 - 2*S3 on the raw distance matrices; it never touches the centering
code path, so the pair makes an independent cross-check.

The jitted helpers at the bottom are the hot path of the direction search:
they evaluate the statistic for a candidate projection appended to a fixed
set of projections, accumulating in a fixed row-major order so results are
bitwise reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "CenteredDistanceMatrix",
    "double_center",
    "dcov_sq",
    "dcov_sq_sform",
]


def _as_points(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("points must be an n x d matrix or a length-n vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("points must be finite")
    return x


def _pairwise_distances(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    d = np.sqrt(d2)
    np.fill_diagonal(d, 0.0)
    return 0.5 * (d + d.T)


@dataclass(frozen=True)
class CenteredDistanceMatrix:
    """A double-centered Euclidean distance matrix.

    Rows and columns each sum to zero within 1e-9 and the matrix is
    symmetric; both are checked at construction.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("centered distance matrix must be square")
        n = v.shape[0]
        scale = max(np.max(np.abs(v)), 1.0)
        if np.max(np.abs(v.sum(axis=0))) > 1e-9 * n * scale:
            raise ValueError("columns do not sum to zero")
        if np.max(np.abs(v.sum(axis=1))) > 1e-9 * n * scale:
            raise ValueError("rows do not sum to zero")
        if np.max(np.abs(v - v.T)) > 1e-9 * scale:
            raise ValueError("matrix is not symmetric")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def double_center(points: np.ndarray) -> CenteredDistanceMatrix:
    """Double-center the pairwise Euclidean distance matrix of the rows.

    Entry (i, j) of the result is a_ij minus the i-th row mean and the j-th
    column mean of the distance matrix, plus its grand mean.
    """
    x = _as_points(points)
    if x.shape[0] < 2:
        raise ValueError("need at least two points")
    a = _pairwise_distances(x)
    row = a.mean(axis=1, keepdims=True)
    col = a.mean(axis=0, keepdims=True)
    return CenteredDistanceMatrix(a - row - col + a.mean())


def dcov_sq(u: np.ndarray, v: np.ndarray) -> float:
    """Squared sample distance covariance of two point sets.

    Computed as the average entrywise product of the two double-centered
    distance matrices; nonnegative up to roundoff, and zero when either
    argument is constant.
    """
    a = double_center(u)
    b = double_center(v)
    if a.n != b.n:
        raise ValueError(f"row counts differ ({a.n} vs {b.n})")
    return float(np.mean(a.values * b.values))


def dcov_sq_sform(u: np.ndarray, v: np.ndarray) -> float:
    """Brute-force S-form of the squared sample distance covariance.

    Evaluates S1 + S2 - 2*S3 with S1 the mean entrywise product of the raw
    distance matrices, S2 the product of their grand means, and S3 the
    triple sum (1/n^3) sum_i sum_j sum_k a_ij b_ik. Intended as an O(n^3)
    cross-check for modest n; agrees with :func:`dcov_sq` to roundoff.
    """
    x = _as_points(u)
    y = _as_points(v)
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"row counts differ ({x.shape[0]} vs {y.shape[0]})")
    if x.shape[0] < 2:
        raise ValueError("need at least two points")
    a = _pairwise_distances(x)
    b = _pairwise_distances(y)
    n = a.shape[0]
    s1 = float(np.einsum("ij,ij->", a, b)) / n**2
    s2 = float(a.mean() * b.mean())
    s3 = float(np.einsum("ij,ik->", a, b)) / n**3
    return s1 + s2 - 2.0 * s3


# ---------------------------------------------------------------------------
# jitted hot path for the sequential direction search
# ---------------------------------------------------------------------------


@njit(cache=True)
def _centered_product_mean(a, b_centered):  # pragma: no cover - compiled
    """Mean of (double-centered a) * b_centered, row-major accumulation."""
    n = a.shape[0]
    rowsum = np.zeros(n)
    total = 0.0
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += a[i, j]
        rowsum[i] = s
        total += s
    grand = total / (n * n)
    acc = 0.0
    for i in range(n):
        ri = rowsum[i] / n
        for j in range(n):
            acc += (a[i, j] - ri - rowsum[j] / n + grand) * b_centered[i, j]
    return acc / (n * n)


@njit(cache=True)
def _joint_objective(fixed_sq, w, b_centered):  # pragma: no cover - compiled
    """dcov_sq of ([fixed projections, w], y) given precomputed pieces.

    fixed_sq holds squared pairwise distances of the fixed projections
    (all zeros when there are none); w is the candidate projection vector;
    b_centered is the double-centered response distance matrix.
    """
    n = w.shape[0]
    a = np.empty((n, n))
    for i in range(n):
        wi = w[i]
        for j in range(n):
            d = wi - w[j]
            a[i, j] = math.sqrt(fixed_sq[i, j] + d * d)
    return _centered_product_mean(a, b_centered)


def warm_up_jit() -> None:
    """Compile (or load from cache) the jitted kernels on a tiny input."""
    z = np.zeros((2, 2))
    _joint_objective(z, np.arange(2.0), z)
