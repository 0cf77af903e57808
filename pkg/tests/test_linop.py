import math

import numpy as np
import pytest
from scipy import linalg

from utils.errors import (
    EigenvalueCollisionError, MatrixFormatError, NegativeSpectrumError, ParameterError, SectorialityError,
    SpectralMethodError,
)
from utils.linop import (
    MatrixOperator, analyticity_angle, angle_plan, fractional_power, load_matrix, parse_matrix, resolvent,
    sector_probe, spectral_angle, spectral_power,
)


class TestMatrixOperator:
    def test_parse_real_and_complex_entries(self):
        A = parse_matrix("# test\n2\n1 0.5\n0 2+1i\n")
        np.testing.assert_allclose(A.entries, [[1.0, 0.5], [0.0, 2.0 + 1.0j]])
        assert not A.is_real

    def test_parse_errors(self):
        with pytest.raises(MatrixFormatError):
            parse_matrix("2\n1 0\n")
        with pytest.raises(MatrixFormatError):
            parse_matrix("2\n1 0\n0 x\n")
        with pytest.raises(MatrixFormatError):
            MatrixOperator(np.ones((2, 3)))

    def test_load_matrix_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_matrix(str(tmp_path / "missing.txt"))

    def test_load_matrix(self, tmp_path):
        path = tmp_path / "a.txt"
        path.write_text("2\n2 -1\n-1 2\n")
        A = load_matrix(str(path))
        assert A.dim == 2 and A.is_real and A.diagonalizable

    def test_jordan_block_is_not_diagonalizable(self):
        J = MatrixOperator.from_array([[1.0, 1.0], [0.0, 1.0]])
        assert not J.diagonalizable
        with pytest.raises(SpectralMethodError):
            J.apply_function(np.exp)

    def test_dirichlet_laplacian_eigenpairs(self):
        A = MatrixOperator.dirichlet_laplacian(16)
        w, v, v_inv = A.spectral_cache
        np.testing.assert_allclose((v * w) @ v_inv, A.entries, atol=1e-9)
        h = 1.0 / 17.0
        assert w[0].real == pytest.approx((2.0 / h ** 2) * (1.0 - math.cos(math.pi * h)))

    def test_functional_calculus_matches_expm(self, spd4):
        np.testing.assert_allclose(spd4.apply_function(lambda w: np.exp(-w)), linalg.expm(-spd4.entries),
                                   atol=1e-12)


class TestResolventAndSector:
    def test_resolvent_inverse(self, spd4):
        R = resolvent(spd4, -1.0 + 2.0j)
        np.testing.assert_allclose(R @ ((-1.0 + 2.0j) * np.eye(4) - spd4.entries), np.eye(4), atol=1e-12)

    def test_resolvent_on_spectrum(self, diag12):
        with pytest.raises(EigenvalueCollisionError):
            resolvent(diag12, 2.0)

    def test_spectral_angle(self):
        A = MatrixOperator.diagonal([1.0, 1.0 + 1.0j])
        assert spectral_angle(A) == pytest.approx(math.pi / 4.0)
        with pytest.raises(NegativeSpectrumError):
            spectral_angle(MatrixOperator.diagonal([1.0, -2.0]))

    def test_sector_probe_bounded_for_normal_matrix(self, spd4):
        report = sector_probe(spd4)
        assert report.spectral_angle == pytest.approx(0.0, abs=1e-12)
        for omega, sup in report.resolvent_sup:
            # normal operator: ||z R(z)|| <= 1 / sin(omega) off the positive axis
            assert sup <= 1.0 / math.sin(min(omega, math.pi / 2.0)) + 1e-9

    def test_sector_probe_rejects_angles_inside_sector(self, diag12):
        with pytest.raises(ParameterError):
            sector_probe(diag12, probe_angles=[0.0])


class TestFractionalPower:
    @pytest.mark.parametrize("b", [0.3, 0.5, 0.8, 1.5])
    def test_contour_matches_spectral_on_diagonal(self, b, cfg):
        A = MatrixOperator.diagonal([1.0, 4.0])
        got = fractional_power(A, b, cfg).entries
        np.testing.assert_allclose(got, np.diag([1.0, 4.0 ** b]), atol=1e-8)

    @pytest.mark.parametrize("b", [0.3, 0.5, 0.8, 1.5])
    def test_contour_matches_spectral_on_spd(self, b, spd4, cfg):
        err = linalg.norm(fractional_power(spd4, b, cfg).entries - spectral_power(spd4, b), 'fro')
        assert err <= 1e-8

    def test_jordan_square_root(self, cfg):
        J = MatrixOperator.from_array([[1.0, 1.0], [0.0, 1.0]])
        root = fractional_power(J, 0.5, cfg).entries
        np.testing.assert_allclose(root, [[1.0, 0.5], [0.0, 1.0]], atol=1e-8)
        np.testing.assert_allclose(root @ root, J.entries, atol=1e-8)

    def test_power_semigroup(self, spd4, cfg):
        a = fractional_power(spd4, 0.3, cfg).entries
        b = fractional_power(spd4, 0.5, cfg).entries
        np.testing.assert_allclose(a @ b, fractional_power(spd4, 0.8, cfg).entries, atol=1e-8)

    def test_spectral_mapping_for_complex_spectrum(self, cfg):
        A = MatrixOperator.from_array([[2.0, 1.0], [-1.0, 2.0]])
        got = np.sort_complex(linalg.eigvals(fractional_power(A, 0.5, cfg).entries))
        expected = np.sort_complex(np.sqrt(A.eigenvalues))
        np.testing.assert_allclose(got, expected, atol=1e-8)

    def test_zero_in_spectrum_by_extrapolation(self, cfg):
        A = MatrixOperator.diagonal([0.0, 4.0])
        np.testing.assert_allclose(fractional_power(A, 0.5, cfg).entries, np.diag([0.0, 2.0]), atol=1e-6)

    def test_integer_power(self, spd4, cfg):
        np.testing.assert_allclose(fractional_power(spd4, 2.0, cfg).entries, spd4.entries @ spd4.entries)

    def test_sectoriality_limit(self, cfg):
        A = MatrixOperator.diagonal([1.0, 1.0 + 10.0j])
        with pytest.raises(SectorialityError):
            fractional_power(A, 2.5, cfg)
        with pytest.raises(ParameterError):
            fractional_power(A, 0.0, cfg)


class TestAngles:
    @pytest.mark.parametrize("alpha, theta, expected", [
        (0.5, 1.0, 1.5707963267948966),
        (1.0, 0.5, 1.0707963267948966),
        (1.0, 1.5, 0.0707963267948966),
        (1.5, 0.2, 0.3902654422649654),
        (1.5, 0.7, 0.0569321089316321),
        (2.0, 0.3, -0.15),
        (0.8, 2.5, -0.7688055098076553),
    ])
    def test_analyticity_angle_values(self, alpha, theta, expected):
        assert analyticity_angle(alpha, theta) == pytest.approx(expected, abs=1e-14)

    @pytest.mark.parametrize("alpha, theta0, beta, gamma, expected", [
        (1.0, 0.0, 0.5, 1.0, 0.7853981633974483),
        (1.5, 0.2, 0.8, 0.9, 1.4883971430626974),
    ])
    def test_composed_plan_values(self, alpha, theta0, beta, gamma, expected):
        plan = angle_plan(alpha, theta0, beta, gamma)
        assert plan.valid
        assert plan.result_angle == pytest.approx(expected, abs=1e-14)

    def test_square_root_of_cosine_generator(self):
        plan = angle_plan(2.0, 0.0, 0.5, 1.0)
        assert plan.valid
        assert plan.result_angle == pytest.approx(math.pi / 2.0)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 2.0])
    def test_half_power_family_angle(self, alpha):
        plan = angle_plan(alpha, 0.0, 0.5, alpha / 2.0)
        assert plan.valid
        assert plan.result_angle == pytest.approx(math.pi / 2.0)

    def test_angle_preserving_for_analytic_semigroup(self):
        for beta in (0.2, 0.5, 0.9):
            assert angle_plan(1.0, math.pi / 2.0, beta, 1.0).result_angle == pytest.approx(math.pi / 2.0)

    def test_validity_boundary(self):
        # theta0 = 0: valid iff beta < (2 pi - pi gamma) / (2 pi - pi alpha)
        alpha, gamma = 1.0, 1.0
        bound = (2.0 - gamma) / (2.0 - alpha)
        assert angle_plan(alpha, 0.0, 0.99 * bound, gamma).valid
        assert not angle_plan(alpha, 0.0, 1.01 * bound, gamma).valid

    def test_monotone_in_beta_and_gamma(self):
        betas = np.linspace(0.1, 1.2, 12)
        angles = [angle_plan(1.5, 0.0, b, 1.0).result_angle for b in betas]
        assert all(a >= b - 1e-15 for a, b in zip(angles, angles[1:]))
        gammas = np.linspace(0.2, 1.8, 12)
        angles = [angle_plan(1.0, 0.0, 0.8, g).result_angle for g in gammas]
        assert all(a >= b - 1e-15 for a, b in zip(angles, angles[1:]))

    def test_out_of_range(self):
        with pytest.raises(ParameterError):
            angle_plan(2.5, 0.0, 0.5, 1.0)
        with pytest.raises(ParameterError):
            angle_plan(1.0, 2.0, 0.5, 1.0)
