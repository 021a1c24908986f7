import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from swjko.errors import InvalidArgument
from swjko.measures import GaussianMeasure, GridMeasure, ParticleCloud, ProjectionSet, sample_gaussian, sample_unit_sphere
from swjko.oracles import finite_diff_grad
from swjko.sliced import (
    QuantileGrid,
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


def _brute_1d(x, y):
    """Best of all matchings between two equal-size uniform 1D samples."""
    import itertools

    return min(np.mean((np.asarray(x) - np.asarray(y)[list(p)]) ** 2) for p in itertools.permutations(range(len(y))))


class TestOneDimensional:
    def test_sorted_examples(self):
        assert w2_1d_uniform_sorted([0.0], [1.0]) == 1.0
        assert w2_1d_uniform_sorted([0.0, 2.0], [1.0, 3.0]) == 1.0
        assert w2_1d_uniform_sorted([3.0, -1.0, 2.0], [2.0, 3.0, -1.0]) == 0.0

    def test_sorted_empty(self):
        with pytest.raises(InvalidArgument):
            w2_1d_uniform_sorted([], [])

    @settings(max_examples=40, deadline=None)
    @given(arrays(float, 5, elements=st.floats(-10, 10)), arrays(float, 5, elements=st.floats(-10, 10)))
    def test_sorted_matches_bruteforce(self, x, y):
        np.testing.assert_allclose(w2_1d_uniform_sorted(x, y), _brute_1d(x, y), rtol=1e-12, atol=1e-12)

    def test_quantile_examples(self):
        q = QuantileGrid(100)
        assert w2_1d_quantile([0.0], [1.0], [1.0], [1.0], q) == 1.0
        assert w2_1d_quantile([0.0, 1.0], [0.5, 0.5], [0.0], [1.0], q) == pytest.approx(0.5, abs=1 / q.M)
        assert w2_1d_quantile([0.2, 1.5], [0.3, 0.7], [0.2, 1.5], [0.3, 0.7], q) == 0.0

    def test_quantile_levels(self):
        np.testing.assert_allclose(QuantileGrid(4).levels, [0.125, 0.375, 0.625, 0.875])

    def test_quantile_rejects_unnormalized(self):
        with pytest.raises(InvalidArgument):
            w2_1d_quantile([0.0, 1.0], [0.5, 0.6], [0.0], [1.0])

    def test_exact_matches_fine_rectangle(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            na, nb = rng.integers(1, 7, 2)
            xa, xb = rng.normal(size=na), rng.normal(size=nb)
            wa, wb = rng.dirichlet(np.ones(na)), rng.dirichlet(np.ones(nb))
            ex = w2_1d_exact(xa, wa, xb, wb)
            fine = w2_1d_quantile(xa, wa, xb, wb, QuantileGrid(20_000))
            assert ex == pytest.approx(fine, rel=1e-3, abs=1e-4)

    def test_exact_uniform_equals_sorted(self):
        rng = np.random.default_rng(4)
        x, y = rng.normal(size=9), rng.normal(size=9)
        w = np.full(9, 1 / 9)
        assert w2_1d_exact(x, w, y, w) == pytest.approx(w2_1d_uniform_sorted(x, y), rel=1e-12)


class TestMonteCarlo:
    def test_identical_is_zero(self):
        c = sample_gaussian(GaussianMeasure([0, 0], np.eye(2)), 50, 0)
        assert sw2_mc(c, c, sample_unit_sphere(30, 2, 1)).value == 0.0

    def test_identical_grids_zero(self):
        g = GridMeasure.regular([-1, -1], [1, 1], [5, 5], density=lambda x: np.exp(-np.sum(x**2, 1)))
        P = sample_unit_sphere(20, 2, 0)
        assert sw2_mc(g, g, P).value == 0.0
        assert sw2_mc(g, g, P, q=None).value == pytest.approx(0.0, abs=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        a, b = ParticleCloud(rng.normal(size=(6, 3))), ParticleCloud(rng.normal(size=(6, 3)))
        P = sample_unit_sphere(10, 3, seed)
        assert sw2_mc(a, b, P).value == pytest.approx(sw2_mc(b, a, P).value, abs=1e-12)
        g = GridMeasure(rng.normal(size=(5, 3)), rng.dirichlet(np.ones(5)), 1.0)
        assert sw2_mc(a, g, P, q=None).value == pytest.approx(sw2_mc(g, a, P, q=None).value, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.1, 5.0))
    def test_scaling(self, seed, alpha):
        rng = np.random.default_rng(seed)
        x, y = rng.normal(size=(7, 2)), rng.normal(size=(7, 2))
        P = sample_unit_sphere(12, 2, seed)
        base = sw2_mc(ParticleCloud(x), ParticleCloud(y), P).value
        scaled = sw2_mc(ParticleCloud(alpha * x), ParticleCloud(alpha * y), P).value
        assert scaled == pytest.approx(alpha**2 * base, rel=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgument):
            sw2_mc(ParticleCloud([[0, 0]]), ParticleCloud([[0, 0, 0]]), sample_unit_sphere(3, 2, 0))

    def test_translation_gives_norm_over_d(self):
        # SW^2 of a cloud and its translate by v is |v|^2/d in expectation over directions
        rng = np.random.default_rng(0)
        x = rng.normal(size=(200, 3))
        v = np.array([1.0, -2.0, 0.5])
        est = sliced_wasserstein(ParticleCloud(x), ParticleCloud(x + v), 4000, seed=5)
        assert abs(est.value - v @ v / 3) < 3 * est.std_error

    def test_line_supported(self):
        rng = np.random.default_rng(1)
        u = rng.normal(size=4)
        u /= np.linalg.norm(u)
        s, t = rng.normal(size=100), 2.0 + rng.normal(size=100)
        est = sliced_wasserstein(ParticleCloud(np.outer(s, u)), ParticleCloud(np.outer(t, u)), 5000, seed=3)
        assert abs(4 * est.value - w2_1d_uniform_sorted(s, t)) < 3 * 4 * est.std_error

    def test_unequal_clouds_use_quantiles(self):
        a = ParticleCloud([[0.0], [1.0]])
        b = ParticleCloud([[0.0]])
        P = ProjectionSet([[1.0]])
        assert sw2_mc(a, b, P, QuantileGrid(100)).value == pytest.approx(0.5, abs=0.01)
        assert sw2_mc(a, b, P, None).value == pytest.approx(0.5, abs=1e-12)

    def test_std_error_reported(self):
        est = sliced_wasserstein(ParticleCloud([[0, 0], [1, 1]]), ParticleCloud([[2, 0], [0, 3]]), 50, seed=1)
        assert est.n_projections == 50 and est.std_error > 0 and est.seed == 1


class TestPositionGradient:
    def test_scalar(self):
        g = grad_sw2_positions(ParticleCloud([[0.3]]), ParticleCloud([[-1.0]]), ProjectionSet([[1.0]]))
        np.testing.assert_allclose(g, [[2 * 1.3]])

    def test_zero_at_target(self):
        c = ParticleCloud(np.random.default_rng(0).normal(size=(5, 2)))
        np.testing.assert_array_equal(grad_sw2_positions(c, c, sample_unit_sphere(9, 2, 0)), 0.0)

    @pytest.mark.parametrize("route", ["sorted", "exact", "rectangle"])
    def test_finite_differences(self, route):
        rng = np.random.default_rng(42)
        x = rng.normal(size=(4, 2))
        P = sample_unit_sphere(8, 2, 7)
        if route == "sorted":
            nu, q = ParticleCloud(rng.normal(size=(4, 2))), QuantileGrid()
        elif route == "exact":
            nu, q = GridMeasure(rng.normal(size=(3, 2)), [0.2, 0.5, 0.3], 1.0), None
        else:
            nu, q = ParticleCloud(rng.normal(size=(3, 2))), QuantileGrid(100)
        f = lambda z: sw2_mc(ParticleCloud(z), nu, P, q).value
        num = finite_diff_grad(f, x, 1e-5)
        ana = grad_sw2_positions(ParticleCloud(x), nu, P, q)
        np.testing.assert_allclose(ana, num, rtol=1e-5, atol=1e-9)


def _tangent_fd(f, w, step=1e-6):
    """Directional derivatives of f along e_i - e_N (simplex tangent basis)."""
    out = []
    for i in range(len(w) - 1):
        e = np.zeros_like(w)
        e[i], e[-1] = 1.0, -1.0
        out.append((f(w + step * e) - f(w - step * e)) / (2 * step))
    return np.array(out)


class TestWeightGradient:
    def test_centered_zero_at_target(self):
        g = GridMeasure.regular([-1, -1], [1, 1], [4, 4], density=lambda x: 1 + x[:, 0] ** 2)
        grad = grad_sw2_weights(g, g, sample_unit_sphere(15, 2, 3))
        np.testing.assert_allclose(grad - grad.mean(), 0.0, atol=1e-9)

    def test_tangent_finite_differences_1d(self):
        mu_sup = np.array([[-0.7], [0.1], [0.9]])
        nu = GridMeasure([[-0.2], [0.6]], [0.45, 0.55], 1.0)
        P = ProjectionSet([[1.0]])
        w = np.array([0.25, 0.35, 0.4])
        f = lambda v: sw2_mc(GridMeasure(mu_sup, v, 1.0), nu, P, None).value
        g = grad_sw2_weights(GridMeasure(mu_sup, w, 1.0), nu, P)
        np.testing.assert_allclose(g[:-1] - g[-1], _tangent_fd(f, w), rtol=1e-4)

    def test_tangent_finite_differences_2d(self):
        rng = np.random.default_rng(8)
        sup = rng.normal(size=(6, 2))
        nu = GridMeasure(rng.normal(size=(4, 2)), rng.dirichlet(np.ones(4)), 1.0)
        P = sample_unit_sphere(10, 2, 2)
        w = rng.dirichlet(np.ones(6))
        f = lambda v: sw2_mc(GridMeasure(sup, v, 1.0), nu, P, None).value
        g = grad_sw2_weights(GridMeasure(sup, w, 1.0), nu, P)
        np.testing.assert_allclose(g[:-1] - g[-1], _tangent_fd(f, w), rtol=1e-5)

    def test_descent_moves_mass_toward_target(self):
        sup = np.array([[0.0], [1.0]])
        nu = GridMeasure([[1.0]], [1.0], 1.0)
        P = ProjectionSet([[1.0]])
        w = np.array([0.6, 0.4])
        g = grad_sw2_weights(GridMeasure(sup, w, 1.0), nu, P)
        assert g[0] > g[1]
        vals = [sw2_mc(GridMeasure(sup, [1 - s, s], 1.0), nu, P, None).value for s in np.linspace(0.4, 1.0, 13)]
        assert np.all(np.diff(vals) < 0)


class TestGaussianForms:
    def test_isotropic(self):
        g0 = GaussianMeasure([0, 0], np.eye(2))
        assert sw2_gaussian_isotropic(g0, g0) == 0.0
        assert sw2_gaussian_isotropic(g0, GaussianMeasure([1, 0], np.eye(2))) == pytest.approx(0.5)
        assert sw2_gaussian_isotropic(GaussianMeasure(np.zeros(3), 4 * np.eye(3)),
                                      GaussianMeasure(np.zeros(3), np.eye(3))) == pytest.approx(1.0)

    def test_isotropic_rejects_general(self):
        with pytest.raises(InvalidArgument):
            sw2_gaussian_isotropic(GaussianMeasure([0, 0], np.diag([1.0, 2.0])), GaussianMeasure([0, 0], np.eye(2)))

    def test_bures_isotropic_and_diagonal(self):
        a = GaussianMeasure([1.0, 2.0, 0.0], 4 * np.eye(3))
        b = GaussianMeasure([0.0, 0.0, 0.0], 9 * np.eye(3))
        assert w2_gaussian_bures(a, b) == pytest.approx(5 + 3 * 1.0)
        D, E = np.array([1.0, 4.0]), np.array([9.0, 0.25])
        got = w2_gaussian_bures(GaussianMeasure([0, 0], np.diag(D)), GaussianMeasure([1, 1], np.diag(E)))
        assert got == pytest.approx(2 + np.sum((np.sqrt(D) - np.sqrt(E)) ** 2))
        assert w2_gaussian_bures(a, a) == pytest.approx(0.0, abs=1e-12)

    def test_bures_vs_1d_quantile(self):
        # in 1D the Bures formula is the exact quantile distance between normals
        from scipy.stats import norm

        u = (np.arange(200_000) + 0.5) / 200_000
        direct = np.mean((norm.ppf(u, 1.0, 2.0) - norm.ppf(u, -0.5, 0.5)) ** 2)
        got = w2_gaussian_bures(GaussianMeasure([1.0], [[4.0]]), GaussianMeasure([-0.5], [[0.25]]))
        assert got == pytest.approx(direct, rel=1e-3)

    def test_sliced_vs_closed_form(self):
        g1, g2 = GaussianMeasure([0, 0], np.eye(2)), GaussianMeasure([1, 0], np.eye(2))
        x, y = sample_gaussian(g1, 10_000, 1), sample_gaussian(g2, 10_000, 2)
        est = sliced_wasserstein(x, y, 2000, seed=3)
        assert abs(est.value - 0.5) < 0.05
