"""Discretized functions on [0, 1]: grids, quadrature, and subspace geometry.

Everything in this package lives on a shared observation grid. Integrals are
composite-trapezoid quadrature on that grid, which is exact for the piecewise
linear interpolants that sampled curves define. Curves and kernels are thin
immutable wrappers around numpy arrays; all operations are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateBasisError, GridMismatchError, NotOrthonormalError

__all__ = [
    "Grid",
    "Curve",
    "Kernel2D",
    "inner_product",
    "weighted_inner_product",
    "projection_kernel",
    "hs_norm",
    "hs_distance",
    "gram_schmidt",
]


def trapezoid_weights(points: np.ndarray) -> np.ndarray:
    """Composite-trapezoid quadrature weights for an ordered set of points."""
    points = np.asarray(points, dtype=float)
    w = np.zeros_like(points)
    w[:-1] += np.diff(points) / 2.0
    w[1:] += np.diff(points) / 2.0
    return w


@dataclass(frozen=True)
class Grid:
    """Ordered observation points in [0, 1] with quadrature weights.

    Parameters
    ----------
    points : array-like
        Strictly increasing time points, first >= 0 and last <= 1.
    weights : array-like, optional
        Positive quadrature weights. Defaults to composite-trapezoid
        weights, which sum to the grid span.
    """

    points: np.ndarray
    weights: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least two points")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if pts[0] < 0.0 or pts[-1] > 1.0:
            raise ValueError("grid points must lie in [0, 1]")
        w = self.weights
        w = trapezoid_weights(pts) if w is None else np.asarray(w, dtype=float)
        if w.shape != pts.shape:
            raise ValueError("weights must match points in length")
        if np.any(w <= 0):
            raise ValueError("quadrature weights must be positive")
        if abs(w.sum() - (pts[-1] - pts[0])) > 1e-12:
            raise ValueError("weights must sum to the grid span")
        pts.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.points.size

    @staticmethod
    def uniform(num_points: int = 100) -> "Grid":
        """Equally spaced grid on [0, 1] including both endpoints."""
        return Grid(np.linspace(0.0, 1.0, num_points))

    def same_as(self, other: "Grid") -> bool:
        return self.points.shape == other.points.shape and np.array_equal(
            self.points, other.points
        )


def _check_same_grid(*objs) -> Grid:
    grid = objs[0].grid
    for o in objs[1:]:
        if not grid.same_as(o.grid):
            raise GridMismatchError(
                f"objects live on different grids "
                f"({len(grid)} vs {len(o.grid)} points)"
            )
    return grid


@dataclass(frozen=True)
class Curve:
    """A function sampled on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.points.shape:
            raise ValueError("curve values must match the grid length")
        if not np.all(np.isfinite(v)):
            raise ValueError("curve values must be finite")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def norm(self) -> float:
        """L2 norm under the grid quadrature."""
        return float(np.sqrt(inner_product(self, self)))


@dataclass(frozen=True)
class Kernel2D:
    """A bivariate kernel A(s, t) sampled on a grid x grid lattice."""

    grid: Grid
    values: np.ndarray
    require_symmetric: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        p = len(self.grid)
        if v.shape != (p, p):
            raise ValueError("kernel matrix must be p x p for a p-point grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("kernel values must be finite")
        if self.require_symmetric and np.max(np.abs(v - v.T)) > 1e-10:
            raise ValueError("kernel is not symmetric within 1e-10")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def is_symmetric(self, tol: float = 1e-10) -> bool:
        return bool(np.max(np.abs(self.values - self.values.T)) <= tol)


def inner_product(f: Curve, g: Curve) -> float:
    """Quadrature approximation of the L2 inner product of two curves.

    Exact for piecewise-linear integrands on the shared grid.
    """
    grid = _check_same_grid(f, g)
    return float(np.sum(grid.weights * f.values * g.values))


def weighted_inner_product(f: Curve, g: Curve, kernel: Kernel2D) -> float:
    """Quadrature approximation of the double integral of f(s) A(s,t) g(t).

    The kernel must be symmetric; the result is then symmetric in f and g.
    """
    grid = _check_same_grid(f, g, kernel)
    if not kernel.is_symmetric():
        raise NotOrthonormalError("weighted inner product requires a symmetric kernel")
    wf = grid.weights * f.values
    wg = grid.weights * g.values
    return float(wf @ kernel.values @ wg)


def projection_kernel(basis: list[Curve], grid: Grid | None = None) -> Kernel2D:
    """Projection kernel P(s,t) = sum_k b_k(s) b_k(t) of an orthonormal basis.

    The basis must be L2-orthonormal to 1e-8; orthonormalize with
    :func:`gram_schmidt` first if needed. An empty basis gives the zero
    kernel, in which case ``grid`` must be supplied explicitly.
    """
    if not basis:
        if grid is None:
            raise ValueError("an empty basis needs an explicit grid")
        return Kernel2D(grid, np.zeros((len(grid), len(grid))))
    g = _check_same_grid(*basis)
    if grid is not None and not grid.same_as(g):
        raise GridMismatchError("basis does not live on the requested grid")
    for i, f in enumerate(basis):
        for j in range(i, len(basis)):
            ip = inner_product(f, basis[j])
            target = 1.0 if i == j else 0.0
            if abs(ip - target) > 1e-8:
                raise NotOrthonormalError(
                    f"basis curves {i} and {j} have inner product {ip:.3e}, "
                    f"expected {target}"
                )
    mat = np.zeros((len(g), len(g)))
    for f in basis:
        mat += np.outer(f.values, f.values)
    return Kernel2D(g, mat)


def hs_norm(kernel: Kernel2D) -> float:
    """Hilbert-Schmidt norm: sqrt of the double integral of the squared kernel."""
    w = kernel.grid.weights
    return float(np.sqrt(np.sum(w[:, None] * w[None, :] * kernel.values**2)))


def hs_distance(k1: Kernel2D, k2: Kernel2D) -> float:
    """Hilbert-Schmidt distance between two kernels on the same grid."""
    grid = _check_same_grid(k1, k2)
    diff = k1.values - k2.values
    w = grid.weights
    return float(np.sqrt(np.sum(w[:, None] * w[None, :] * diff**2)))


def orient_positive(values: np.ndarray) -> np.ndarray:
    """Sign convention: largest-magnitude entry positive.

    When several entries tie for the largest magnitude, the vector is kept
    as is whenever any of them is positive, so exact symmetric ties resolve
    toward the positive orientation.
    """
    m = np.max(np.abs(values))
    if m == 0.0:
        return values
    at_max = np.abs(values) >= m * (1.0 - 1e-12)
    return values if np.any(values[at_max] > 0) else -values


def gram_schmidt(curves: list[Curve]) -> list[Curve]:
    """L2-orthonormalize curves by modified Gram-Schmidt.

    The output spans the same space and is orthonormal to 1e-10. Each output
    curve is sign-flipped so its largest-magnitude value is positive, which
    makes downstream estimates deterministic (the fitting objective cannot
    distinguish a direction from its negative).

    Raises
    ------
    DegenerateBasisError
        If the curves are numerically linearly dependent.
    """
    if not curves:
        return []
    _check_same_grid(*curves)
    norms0 = [c.norm() for c in curves]
    out: list[Curve] = []
    for i, c in enumerate(curves):
        v = c.values.copy()
        for q in out:
            v = v - inner_product(Curve(c.grid, v), q) * q.values
        # second pass guards against cancellation in near-dependent sets
        for q in out:
            v = v - inner_product(Curve(c.grid, v), q) * q.values
        nrm = float(np.sqrt(np.sum(c.grid.weights * v * v)))
        if nrm < 1e-10 * max(norms0[i], 1.0):
            raise DegenerateBasisError(
                f"curve {i} is numerically dependent on the previous ones"
            )
        v /= nrm
        out.append(Curve(c.grid, orient_positive(v)))
    return out
