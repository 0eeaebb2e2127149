import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lattice_gibbs import (Dgauss1dSpec, GaussianParams, RankDeficient,
                           build_basis, builtin_basis, density_exponent,
                           dgauss_1d_pmf, dgauss_1d_table, read_basis_file,
                           sample_dgauss_1d, sample_dgauss_1d_many, theta_sum)
from lattice_gibbs.errors import DimensionMismatch


def brute_theta(sigma, spacing, offset, k_max=40):
    ks = np.arange(-k_max, k_max + 1)
    return float(np.exp(-((spacing * ks + offset) ** 2) / (2 * sigma ** 2)).sum())


class TestBuildBasis:
    def test_identity(self):
        b = build_basis(np.eye(2))
        assert np.allclose(b.q_matrix, np.eye(2))
        assert np.allclose(b.r_matrix, np.eye(2))
        assert np.allclose(b.gs_norms, [1.0, 1.0])

    def test_upper_triangular_fixed_point(self):
        m = np.array([[1.0, 0.5], [0.0, 1.1]])
        b = build_basis(m)
        assert np.allclose(b.r_matrix, m, atol=1e-12)
        assert np.allclose(b.q_matrix, np.eye(2), atol=1e-12)
        assert np.allclose(b.gs_norms, [1.0, 1.1])

    def test_swapped_unit_vectors(self):
        # hand Gram-Schmidt: both orthogonalized lengths are 1
        b = build_basis([[0.0, 1.0], [1.0, 0.0]])
        assert np.allclose(b.gs_norms, [1.0, 1.0])
        assert np.allclose(np.diag(b.r_matrix), [1.0, 1.0])

    def test_qr_reconstruction_and_sign(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            m = rng.normal(size=(3, 3))
            b = build_basis(m)
            assert np.allclose(b.q_matrix @ b.r_matrix, m, atol=1e-12)
            assert np.all(np.diag(b.r_matrix) > 0)
            assert np.allclose(b.q_matrix.T @ b.q_matrix, np.eye(3), atol=1e-12)
            assert np.allclose(b.gs_norms, np.diag(b.r_matrix))

    def test_rank_deficient(self):
        with pytest.raises(RankDeficient):
            build_basis([[1.0, 2.0], [2.0, 4.0]])

    def test_not_square(self):
        with pytest.raises(DimensionMismatch):
            build_basis(np.ones((2, 3)))

    def test_non_finite(self):
        with pytest.raises(ValueError):
            build_basis([[1.0, np.nan], [0.0, 1.0]])

    def test_idempotent_on_upper_triangular(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            m = np.triu(rng.normal(size=(3, 3)))
            np.fill_diagonal(m, np.abs(np.diag(m)) + 0.5)
            b = build_basis(m)
            assert np.max(np.abs(b.r_matrix - m)) < 1e-12


class TestBasisFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "b.txt"
        path.write_text("1 0.5\n0 1.1\n")
        b = read_basis_file(path)
        assert np.allclose(b.b_matrix, [[1.0, 0.5], [0.0, 1.1]])

    def test_single_entry(self, tmp_path):
        path = tmp_path / "b.txt"
        path.write_text("2.5\n")
        b = read_basis_file(path)
        assert b.n == 1 and b.gs_norms[0] == pytest.approx(2.5)

    def test_builtin_names(self):
        for name in ("1d", "2d", "3d"):
            assert builtin_basis(name).n == int(name[0])
        with pytest.raises(KeyError):
            builtin_basis("4d")


class TestDensityExponent:
    def test_zero_vector(self):
        b = build_basis(np.eye(2))
        p = GaussianParams(1.0, np.zeros(2))
        assert density_exponent(b, p, [0, 0]) == 0.0

    def test_unit_distance(self):
        b = build_basis(np.eye(2))
        p = GaussianParams(1.0, np.zeros(2))
        assert density_exponent(b, p, [1, 0]) == pytest.approx(-0.5)

    def test_direct_arithmetic(self, basis2d):
        p = GaussianParams(1.0, np.array([0.3, -0.2]))
        v = np.array([1.5, 1.1]) - np.array([0.3, -0.2])
        assert density_exponent(basis2d, p, [1, 1]) == pytest.approx(
            -float(v @ v) / 2.0, rel=1e-14)

    def test_dimension_mismatch(self, basis2d):
        p = GaussianParams(1.0, np.zeros(2))
        with pytest.raises(DimensionMismatch):
            density_exponent(basis2d, p, [1, 2, 3])


class TestDgauss1d:
    def test_reflection_about_half_integer(self):
        spec = Dgauss1dSpec(1.0, 0.5, 12.0)
        assert dgauss_1d_pmf(spec, 0) == pytest.approx(dgauss_1d_pmf(spec, 1), rel=1e-14)

    def test_against_truncated_series(self):
        spec = Dgauss1dSpec(1.0, 0.0, 12.0)
        oracle = math.exp(0.0) / brute_theta(1.0, 1.0, 0.0)
        assert dgauss_1d_pmf(spec, 0) == pytest.approx(oracle, rel=1e-12)

    def test_tiny_sigma_concentrates(self):
        spec = Dgauss1dSpec(0.05, 3.0, 12.0)
        assert dgauss_1d_pmf(spec, 3) > 1.0 - 1e-12

    def test_outside_support_is_zero(self):
        spec = Dgauss1dSpec(0.5, 0.0, 12.0)
        assert dgauss_1d_pmf(spec, 100) == 0.0

    def test_empty_support_rejected(self):
        with pytest.raises(ValueError):
            Dgauss1dSpec(0.01, 0.5, 12.0)

    def test_invalid_sigma(self):
        with pytest.raises(ValueError):
            Dgauss1dSpec(-1.0, 0.0)

    @given(st.floats(0.08, 5.0), st.floats(-8.0, 8.0))
    @settings(max_examples=60, deadline=None)
    def test_pmf_sums_to_one(self, sigma, center):
        lo, hi, probs = dgauss_1d_table(Dgauss1dSpec(sigma, center, 12.0))
        assert abs(probs.sum() - 1.0) < 1e-12
        assert lo <= hi

    def test_symmetric_support_symmetry(self):
        # integer center: pmf(center+d) == pmf(center-d)
        spec = Dgauss1dSpec(1.3, 2.0, 12.0)
        for d in range(1, 10):
            assert dgauss_1d_pmf(spec, 2 + d) == pytest.approx(
                dgauss_1d_pmf(spec, 2 - d), rel=1e-12)


class TestSampleDgauss1d:
    def test_mean_clt_bound(self):
        spec = Dgauss1dSpec(1.0, 0.0, 12.0)
        draws = sample_dgauss_1d_many(spec, 10 ** 5, np.random.default_rng(0))
        assert abs(draws.mean()) < 4.0 * 1.0 / math.sqrt(10 ** 5)

    def test_tiny_sigma_always_at_mode(self):
        spec = Dgauss1dSpec(0.05, 3.0, 12.0)
        draws = sample_dgauss_1d_many(spec, 10 ** 4, np.random.default_rng(1))
        assert np.all(draws == 3)

    def test_empirical_tv(self):
        spec = Dgauss1dSpec(2.0, 0.7, 12.0)
        draws = sample_dgauss_1d_many(spec, 10 ** 6, np.random.default_rng(2))
        lo, hi, probs = dgauss_1d_table(spec)
        counts = np.bincount((draws - lo).astype(np.int64), minlength=hi - lo + 1)
        tv = 0.5 * np.abs(counts / len(draws) - probs).sum()
        assert tv < 0.005

    def test_single_draw_in_support(self):
        spec = Dgauss1dSpec(0.7, -2.3, 12.0)
        lo, hi = spec.support()
        rng = np.random.default_rng(3)
        for _ in range(100):
            assert lo <= sample_dgauss_1d(spec, rng) <= hi


class TestThetaSum:
    def test_against_brute_force(self):
        assert theta_sum(1.0, 1.0, 0.0) == pytest.approx(
            brute_theta(1.0, 1.0, 0.0), rel=1e-12)

    def test_offset_periodicity(self):
        for xi in (0.13, 0.77, 2.9):
            a = theta_sum(0.8, 1.1, xi)
            b = theta_sum(0.8, 1.1, xi + 1.1)
            assert a == pytest.approx(b, rel=1e-13)

    def test_offset_reflection(self):
        for xi in (0.13, 0.77, 0.5):
            assert theta_sum(0.8, 1.1, xi) == theta_sum(0.8, 1.1, -xi)

    def test_centered_is_maximal(self):
        for xi in np.linspace(0.0, 1.1, 23):
            assert theta_sum(0.7, 1.1, xi) <= theta_sum(0.7, 1.1, 0.0) + 1e-15

    @given(st.floats(0.1, 4.0), st.floats(0.3, 2.0), st.floats(-5.0, 5.0))
    @settings(max_examples=60, deadline=None)
    def test_matches_wide_oracle(self, sigma, spacing, offset):
        val = theta_sum(sigma, spacing, offset)
        oracle = brute_theta(sigma, spacing, offset, k_max=120)
        assert val == pytest.approx(oracle, rel=1e-10)

    def test_validation(self):
        with pytest.raises(ValueError):
            theta_sum(-1.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            theta_sum(1.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            theta_sum(1.0, 1.0, 0.0, rel_tol=0.5)


class TestGaussianParams:
    def test_sigma_positive(self):
        with pytest.raises(ValueError):
            GaussianParams(0.0, np.zeros(2))

    def test_rotated_center(self, basis2d):
        p = GaussianParams(1.0, np.array([0.3, -0.2]))
        assert np.allclose(p.rotated_center(basis2d),
                           basis2d.q_matrix.T @ p.center)

    def test_immutable(self, basis2d):
        p = GaussianParams(1.0, np.array([0.3, -0.2]))
        with pytest.raises(ValueError):
            p.center[0] = 5.0
        with pytest.raises(ValueError):
            basis2d.b_matrix[0, 0] = 9.0
