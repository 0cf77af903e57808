import math

import numpy as np
import pytest
from scipy import linalg

from utils.errors import ContourError, ParameterError, SectorialityError
from utils.kernels import KernelSpec
from utils.linop import MatrixOperator
from utils.resolvent import ResolventFamily
from utils.specfun import ml
from utils.subordinate import (
    SubordinationCase, chain_subordination, dunford_s_gamma_beta, family_for, semigroup_defect,
    source_order, subordinate_apply, subordinated_direct, target_order, identity_kernel, verify_theorem_main,
)


class TestKernelSelection:
    def test_reductions(self, diag12):
        assert identity_kernel(SubordinationCase(diag12, 1.0, 1.0, 0.5)).family == "phi"
        assert identity_kernel(SubordinationCase(diag12, 1.0, 0.5, 0.5)).family == "half"
        assert identity_kernel(SubordinationCase(diag12, 1.0, 0.5, 0.5), use_reductions=False).family == "f"
        assert identity_kernel(SubordinationCase(diag12, 1.0, 0.7, 0.9)).family == "f"

    def test_orders(self):
        assert source_order(KernelSpec("phi", gamma=0.5)) is None
        assert target_order(KernelSpec("phi", gamma=0.5), 2.0) == 1.0
        assert source_order(KernelSpec("p", alpha=0.5)) == 1.0
        assert target_order(KernelSpec("half", alpha=1.0), 1.0) == 0.5

    def test_family_for_non_diagonalizable(self):
        J = MatrixOperator.from_array([[1.0, 1.0], [0.0, 1.0]])
        assert family_for(J, 0.8).method == "contour"
        assert family_for(J, 2.0).method == "series"
        assert family_for(MatrixOperator.scalar(1.0), 0.8).method == "spectral"


class TestSubordinationIdentity:
    @pytest.mark.parametrize("alpha, beta, gamma, reductions", [
        (1.0, 0.5, 0.5, True),
        (1.0, 1.0, 0.5, True),
        (0.8, 1.0, 0.4, True),
        (1.0, 0.5, 0.5, False),
        (1.0, 0.7, 0.9, True),
    ])
    def test_identity_on_diagonal(self, alpha, beta, gamma, reductions, diag12, cfg):
        case = SubordinationCase(diag12, alpha, beta, gamma)
        assert max(verify_theorem_main(case, cfg, use_reductions=reductions)) <= 1e-5

    def test_cosine_family_to_half_power(self, diag12, cfg):
        case = SubordinationCase(diag12, 2.0, 0.5, 1.0)
        assert max(verify_theorem_main(case, cfg)) <= 1e-4

    def test_semigroup_to_half_order_family(self, cfg):
        F = ResolventFamily(MatrixOperator.scalar(2.0), 1.0)
        for t in (0.5, 1.0, 2.0):
            value = subordinate_apply(F, KernelSpec("half", alpha=1.0), t, np.ones(1), cfg)[0]
            assert value == pytest.approx(ml(-math.sqrt(2.0 * t), 0.5), abs=1e-5)

    def test_stable_subordination_of_semigroup(self, spd4, cfg):
        F = ResolventFamily(spd4, 1.0)
        x = np.arange(1.0, 5.0)
        value = subordinate_apply(F, KernelSpec("p", alpha=0.5), 1.0, x, cfg)
        np.testing.assert_allclose(value, subordinated_direct(spd4, 0.5, 1.0, 1.0, x, cfg), atol=1e-6)

    def test_sector_too_wide(self, cfg):
        A = MatrixOperator.diagonal([1.0, 1.0 + 2.0j])
        with pytest.raises(SectorialityError):
            SubordinationCase(A, 1.5, 0.5, 0.75).validate()

    def test_kernel_order_mismatch(self, diag12, cfg):
        with pytest.raises(ParameterError):
            subordinate_apply(ResolventFamily(diag12, 0.5), KernelSpec("p", alpha=0.5), 1.0, np.ones(2), cfg)


class TestDirectEvaluation:
    def test_dunford_matches_spectral(self, spd4, cfg):
        got = dunford_s_gamma_beta(spd4, 0.5, 0.8, 1.0, cfg)
        expected = spd4.apply_function(lambda w: ml(-np.sqrt(w), 0.8))
        np.testing.assert_allclose(got, expected, atol=1e-8)

    def test_jordan_block_through_fractional_power(self, cfg):
        J = MatrixOperator.from_array([[1.0, 1.0], [0.0, 1.0]])
        root = np.array([[1.0, 0.5], [0.0, 1.0]])
        x = np.array([0.0, 1.0])
        np.testing.assert_allclose(subordinated_direct(J, 0.5, 1.0, 0.7, x, cfg),
                                   linalg.expm(-0.7 * root) @ x, atol=1e-7)

    def test_dunford_needs_invertible_generator(self, cfg):
        with pytest.raises(ContourError):
            dunford_s_gamma_beta(MatrixOperator.diagonal([0.0, 1.0]), 0.5, 1.0, 1.0, cfg)


class TestChainAndSemigroup:
    @pytest.mark.parametrize("rho", [0.5, 2.0])
    def test_chain_at_order_two(self, rho, cfg):
        report = chain_subordination(rho, 2.0, 1.0, cfg)
        assert report.chained == pytest.approx(report.exact, abs=1e-6)
        assert report.single == pytest.approx(report.exact, abs=1e-6)
        assert report.defect <= 1e-6

    def test_chain_order_range(self, cfg):
        with pytest.raises(ParameterError):
            chain_subordination(1.0, 1.0, 1.0, cfg)

    def test_heat_semigroup_from_cosine_family(self, diag12, cfg):
        F = ResolventFamily(diag12, 2.0)
        assert semigroup_defect(F, KernelSpec("phi", gamma=0.5), 0.4, 0.7, np.ones(2), cfg) <= 1e-6

    def test_stable_subordinated_semigroup(self, diag12, cfg):
        F = ResolventFamily(diag12, 1.0)
        assert semigroup_defect(F, KernelSpec("p", alpha=0.5), 0.4, 0.7, np.ones(2), cfg) <= 1e-6

    def test_half_order_target_is_not_a_semigroup(self, diag12, cfg):
        with pytest.raises(ParameterError):
            semigroup_defect(ResolventFamily(diag12, 1.0), KernelSpec("half", alpha=1.0), 0.4, 0.7,
                             np.ones(2), cfg)
