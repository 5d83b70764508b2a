import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsdr import (
    Curve,
    DegenerateBasisError,
    Grid,
    GridMismatchError,
    Kernel2D,
    NotOrthonormalError,
    gram_schmidt,
    hs_distance,
    hs_norm,
    inner_product,
    projection_kernel,
    weighted_inner_product,
)

QUAD_TOL = 1e-3  # trapezoid error for smooth trig integrands on 100 points


def curve(grid, fn):
    return Curve(grid, fn(grid.points))


class TestGrid:
    def test_trapezoid_weights_sum_to_span(self):
        g = Grid.uniform(100)
        assert abs(g.weights.sum() - 1.0) < 1e-12

    def test_rejects_unsorted_points(self):
        with pytest.raises(ValueError):
            Grid(np.array([0.0, 0.5, 0.4, 1.0]))

    def test_rejects_points_outside_unit_interval(self):
        with pytest.raises(ValueError):
            Grid(np.array([-0.1, 0.5, 1.0]))

    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            Grid(np.array([0.0, 0.5, 1.0]), weights=np.array([0.5, 0.5, 0.5]))


class TestInnerProduct:
    def test_constant_functions(self, grid100):
        one = curve(grid100, lambda t: np.ones_like(t))
        assert inner_product(one, one) == pytest.approx(1.0, abs=1e-12)

    def test_sin_squared_half(self, grid100):
        # analytic: integral of sin^2(3 pi t / 2) over [0,1] is 1/2
        f = curve(grid100, lambda t: np.sin(3 * np.pi * t / 2))
        assert inner_product(f, f) == pytest.approx(0.5, abs=QUAD_TOL)

    def test_orthogonal_sines(self, grid100):
        # analytic: these half-integer sines are orthogonal on [0,1]
        f = curve(grid100, lambda t: np.sin(3 * np.pi * t / 2))
        g = curve(grid100, lambda t: np.sin(5 * np.pi * t / 2))
        assert inner_product(f, g) == pytest.approx(0.0, abs=QUAD_TOL)

    def test_symmetry_and_bilinearity(self, grid100):
        rng = np.random.default_rng(0)
        f = Curve(grid100, rng.normal(size=100))
        g = Curve(grid100, rng.normal(size=100))
        h = Curve(grid100, rng.normal(size=100))
        assert inner_product(f, g) == pytest.approx(inner_product(g, f), rel=1e-12)
        lhs = inner_product(Curve(grid100, 2.0 * f.values + g.values), h)
        rhs = 2.0 * inner_product(f, h) + inner_product(g, h)
        assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_grid_mismatch(self, grid100):
        other = Grid.uniform(50)
        with pytest.raises(GridMismatchError):
            inner_product(
                Curve(grid100, np.ones(100)), Curve(other, np.ones(50))
            )

    @given(
        values=st.lists(
            st.floats(-100, 100, allow_nan=False), min_size=2, max_size=30
        ),
        scale=st.floats(-5, 5, allow_nan=False),
        data=st.data(),
    )
    @settings(max_examples=60, deadline=None)
    def test_exact_for_piecewise_linear_integrands(self, values, scale, data):
        # trapezoid quadrature integrates grid-piecewise-linear functions
        # exactly: compare against the segment-wise analytic integral
        n = len(values)
        raw = data.draw(
            st.lists(
                st.integers(0, 10**6), min_size=n, max_size=n, unique=True
            )
        )
        pts = np.sort(np.asarray(raw, dtype=float) / 10**6)
        g = Grid(pts)
        vals = np.asarray(values)
        f = Curve(g, vals)
        const = Curve(g, np.full(n, scale))
        exact = scale * np.sum((vals[:-1] + vals[1:]) / 2.0 * np.diff(pts))
        assert inner_product(f, const) == pytest.approx(
            exact, abs=1e-12 * max(1, abs(exact))
        )


class TestWeightedInnerProduct:
    def test_identity_kernel_reduces_to_plain(self, grid100):
        rng = np.random.default_rng(1)
        f = Curve(grid100, rng.normal(size=100))
        g = Curve(grid100, rng.normal(size=100))
        identity = Kernel2D(grid100, np.diag(1.0 / grid100.weights))
        assert weighted_inner_product(f, g, identity) == pytest.approx(
            inner_product(f, g), rel=1e-10
        )

    def test_positive_definite_gives_positive(self, grid100):
        rng = np.random.default_rng(2)
        f = Curve(grid100, rng.normal(size=100))
        a = Kernel2D(grid100, np.diag(1.0 + np.arange(100.0)))
        assert weighted_inner_product(f, f, a) > 0

    def test_rank_one_operator_algebra(self, grid100):
        rng = np.random.default_rng(3)
        phi = gram_schmidt([Curve(grid100, rng.normal(size=100))])[0]
        f = Curve(grid100, rng.normal(size=100))
        g = Curve(grid100, rng.normal(size=100))
        a = Kernel2D(grid100, np.outer(phi.values, phi.values))
        expected = inner_product(f, phi) * inner_product(phi, g)
        assert weighted_inner_product(f, g, a) == pytest.approx(expected, rel=1e-10)

    def test_asymmetric_kernel_rejected(self, grid100):
        f = Curve(grid100, np.ones(100))
        asym = Kernel2D(grid100, np.triu(np.ones((100, 100))))
        with pytest.raises(NotOrthonormalError):
            weighted_inner_product(f, f, asym)


class TestProjectionKernel:
    def test_rank_one(self, grid100):
        rng = np.random.default_rng(4)
        phi = gram_schmidt([Curve(grid100, rng.normal(size=100))])[0]
        p = projection_kernel([phi])
        assert np.allclose(p.values, np.outer(phi.values, phi.values))

    def test_empty_basis_zero_kernel(self, grid100):
        p = projection_kernel([], grid=grid100)
        assert np.all(p.values == 0.0)

    def test_two_curves_hs_norm_sqrt2(self, grid100):
        rng = np.random.default_rng(5)
        basis = gram_schmidt(
            [Curve(grid100, rng.normal(size=100)) for _ in range(2)]
        )
        p = projection_kernel(basis)
        assert hs_norm(p) == pytest.approx(np.sqrt(2.0), rel=1e-8)

    def test_non_orthonormal_rejected_naming_pair(self, grid100):
        f = Curve(grid100, np.ones(100))
        with pytest.raises(NotOrthonormalError, match="0 and 1"):
            projection_kernel([f, f])

    def test_idempotent_under_quadrature_composition(self, grid100):
        rng = np.random.default_rng(6)
        basis = gram_schmidt(
            [Curve(grid100, rng.normal(size=100)) for _ in range(3)]
        )
        p = projection_kernel(basis).values
        composed = p @ np.diag(grid100.weights) @ p
        assert np.max(np.abs(composed - p)) < 1e-6


class TestHsDistance:
    def test_identical_kernels(self, grid100):
        rng = np.random.default_rng(7)
        m = rng.normal(size=(100, 100))
        k = Kernel2D(grid100, m)
        assert hs_distance(k, Kernel2D(grid100, m.copy())) == 0.0

    def test_orthogonal_rank_one_projectors(self, grid100):
        rng = np.random.default_rng(8)
        basis = gram_schmidt(
            [Curve(grid100, rng.normal(size=100)) for _ in range(2)]
        )
        p1 = projection_kernel([basis[0]])
        p2 = projection_kernel([basis[1]])
        assert hs_distance(p1, p2) == pytest.approx(np.sqrt(2.0), rel=1e-8)

    @pytest.mark.parametrize("rank", [1, 2, 4])
    def test_projector_vs_zero(self, grid100, rank):
        rng = np.random.default_rng(9 + rank)
        basis = gram_schmidt(
            [Curve(grid100, rng.normal(size=100)) for _ in range(rank)]
        )
        p = projection_kernel(basis)
        zero = projection_kernel([], grid=grid100)
        assert hs_distance(p, zero) == pytest.approx(np.sqrt(rank), rel=1e-8)

    def test_triangle_inequality(self, grid100):
        rng = np.random.default_rng(12)
        ks = [Kernel2D(grid100, rng.normal(size=(100, 100))) for _ in range(3)]
        assert hs_distance(ks[0], ks[2]) <= (
            hs_distance(ks[0], ks[1]) + hs_distance(ks[1], ks[2]) + 1e-12
        )

    def test_invariant_under_basis_rotation(self, grid100):
        # the kernel of a span must not depend on which orthonormal basis
        # of the span built it
        rng = np.random.default_rng(13)
        basis = gram_schmidt(
            [Curve(grid100, rng.normal(size=100)) for _ in range(3)]
        )
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        mat = np.column_stack([b.values for b in basis]) @ q
        rotated = [Curve(grid100, mat[:, j]) for j in range(3)]
        p1 = projection_kernel(basis)
        p2 = projection_kernel(rotated)
        assert hs_distance(p1, p2) < 1e-8


class TestGramSchmidt:
    def test_single_curve_normalized(self, grid100):
        f = Curve(grid100, 3.0 * np.sin(2 * np.pi * grid100.points) + 1.0)
        (out,) = gram_schmidt([f])
        assert out.norm() == pytest.approx(1.0, abs=1e-12)

    def test_orthonormal_pair_unchanged_up_to_sign(self, grid100):
        rng = np.random.default_rng(14)
        basis = gram_schmidt(
            [Curve(grid100, rng.normal(size=100)) for _ in range(2)]
        )
        again = gram_schmidt(basis)
        for a, b in zip(basis, again):
            assert min(
                np.max(np.abs(a.values - b.values)),
                np.max(np.abs(a.values + b.values)),
            ) < 1e-10

    def test_one_and_t_give_legendre_pair(self, grid100):
        # analytic orthogonalization of {1, t} on [0,1]
        one = Curve(grid100, np.ones(100))
        ident = Curve(grid100, grid100.points.copy())
        q0, q1 = gram_schmidt([one, ident])
        assert np.max(np.abs(q0.values - 1.0)) < 1e-10
        expected = np.sqrt(12.0) * (grid100.points - 0.5)
        assert np.max(np.abs(q1.values - expected)) < 1e-3

    def test_output_orthonormal(self, grid100):
        rng = np.random.default_rng(15)
        out = gram_schmidt(
            [Curve(grid100, rng.normal(size=100)) for _ in range(5)]
        )
        for i, a in enumerate(out):
            for j, b in enumerate(out):
                target = 1.0 if i == j else 0.0
                assert inner_product(a, b) == pytest.approx(target, abs=1e-10)

    def test_rank_deficient_rejected(self, grid100):
        f = Curve(grid100, np.sin(np.pi * grid100.points))
        g = Curve(grid100, 2.0 * f.values)
        with pytest.raises(DegenerateBasisError):
            gram_schmidt([f, g])

    def test_sign_convention(self, grid100):
        f = Curve(grid100, -np.abs(np.sin(2 * np.pi * grid100.points)) - 0.1)
        (out,) = gram_schmidt([f])
        assert out.values[np.argmax(np.abs(out.values))] > 0
