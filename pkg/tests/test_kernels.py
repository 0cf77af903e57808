import math

import numpy as np
import pytest
from scipy import special

from utils.errors import DomainError, ParameterError
from utils.kernels import (
    KERNEL_COLUMNS, KernelSpec, f_kernel, f_kernel_semigroup, half_power_kernel, kernel_laplace_check,
    kernel_mass, kernel_table, kernel_tail_mass, p_kernel, phi_kernel, validate_yosida_variant,
)


def stable_third(s):
    """p_{1/3}(1, s) through the Airy form of Psi_{1/3}."""
    x = s ** (-1.0 / 3.0)
    psi = 3.0 ** (2.0 / 3.0) * special.airy(x / 3.0 ** (1.0 / 3.0))[0]
    return s ** (-4.0 / 3.0) * psi / 3.0


class TestClosedForms:
    @pytest.mark.parametrize("s", [0.1, 0.8, 2.5])
    def test_phi_half_is_gaussian(self, s):
        t = 1.7
        assert phi_kernel(0.5, t, s) == pytest.approx(math.exp(-s * s / (4.0 * t)) / math.sqrt(math.pi * t))

    @pytest.mark.parametrize("s", [0.2, 1.0, 3.0])
    def test_p_third_is_airy(self, s):
        assert p_kernel(1.0 / 3.0, 1.0, s) == pytest.approx(stable_third(s), rel=1e-9)

    @pytest.mark.parametrize("s", [0.3, 1.0, 4.0])
    def test_phi_ray_integral_matches_series(self, s, cfg):
        assert phi_kernel(0.3, 1.2, s, route="integral", cfg=cfg) == pytest.approx(
            phi_kernel(0.3, 1.2, s), rel=1e-7, abs=1e-12)

    @pytest.mark.parametrize("s", [0.2, 0.7, 2.0])
    def test_yosida_route_matches_levy(self, s, cfg):
        assert p_kernel(0.5, 1.0, s, route="yosida", cfg=cfg) == pytest.approx(p_kernel(0.5, 1.0, s),
                                                                               rel=1e-7, abs=1e-12)

    def test_half_power_kernel(self):
        assert half_power_kernel(1.0, 1.0, 1.0) == pytest.approx(0.5 / math.pi)
        with pytest.raises(ParameterError):
            half_power_kernel(2.5, 1.0, 1.0)

    def test_phi_far_tail_underflows_to_zero(self):
        assert phi_kernel(0.3, 1.0, 200.0) == 0.0


class TestScaling:
    @pytest.mark.parametrize("t", [0.3, 2.0, 5.0])
    def test_phi_self_similarity(self, t):
        g, s = 0.4, 1.3
        assert phi_kernel(g, t, s) == pytest.approx(t ** (-g) * phi_kernel(g, 1.0, s * t ** (-g)), rel=1e-12)

    @pytest.mark.parametrize("t", [0.3, 2.0, 5.0])
    def test_p_self_similarity(self, t):
        a, s = 0.6, 1.3
        c = t ** (-1.0 / a)
        assert p_kernel(a, t, s) == pytest.approx(c * p_kernel(a, 1.0, s * c), rel=1e-12)


class TestGeneralKernel:
    @pytest.mark.parametrize("s", [0.3, 1.0, 2.5])
    def test_subordinated_semigroup_is_stable_density(self, s, cfg):
        spec = KernelSpec("f", alpha=1.0, gamma=1.0, beta=0.5)
        assert f_kernel(spec, 1.0, s, cfg) == pytest.approx(p_kernel(0.5, 1.0, s), rel=1e-7, abs=1e-12)
        assert f_kernel_semigroup(1.0, 0.5, 1.0, s, cfg=cfg) == pytest.approx(p_kernel(0.5, 1.0, s),
                                                                            rel=1e-7, abs=1e-12)

    @pytest.mark.parametrize("s", [0.3, 1.0, 2.5])
    def test_unit_power_reduces_to_phi(self, s, cfg):
        spec = KernelSpec("f", alpha=1.0, gamma=0.5, beta=1.0)
        assert f_kernel(spec, 1.0, s, cfg) == pytest.approx(phi_kernel(0.5, 1.0, s), rel=1e-7, abs=1e-12)

    @pytest.mark.parametrize("s", [0.3, 1.0, 2.5])
    def test_half_power_reduction(self, s, cfg):
        spec = KernelSpec("f", alpha=1.0, gamma=0.5, beta=0.5)
        assert f_kernel(spec, 1.0, s, cfg) == pytest.approx(half_power_kernel(1.0, 1.0, s), rel=1e-7,
                                                            abs=1e-12)

    @pytest.mark.parametrize("gamma", [0.5, 0.7])
    def test_cross_route_phi_identity(self, gamma, cfg):
        spec = KernelSpec("f", alpha=1.0 / gamma, gamma=1.0, beta=1.0)
        for s in (0.4, 1.5):
            assert f_kernel(spec, 1.0, s, cfg) == pytest.approx(phi_kernel(gamma, 1.0, s), rel=1e-7, abs=1e-12)

    def test_contour_angle_does_not_matter(self, cfg):
        values = [f_kernel(KernelSpec("f", alpha=1.0, gamma=0.5, beta=0.5, omega=w), 1.0, 0.8, cfg)
                  for w in (1.8, 2.2, 2.6)]
        assert max(values) - min(values) <= 1e-8

    def test_parameter_ranges(self):
        with pytest.raises(ParameterError):
            KernelSpec("f", alpha=1.0, gamma=1.0, beta=1.0).validate()
        with pytest.raises(ParameterError):
            KernelSpec("f", alpha=1.0, gamma=0.5, beta=2.0).validate()
        with pytest.raises(ParameterError):
            KernelSpec("f", alpha=1.0, gamma=0.5, beta=0.5, route="semigroup").validate()
        with pytest.raises(ParameterError):
            KernelSpec("phi", gamma=0.5, route="yosida").validate()
        with pytest.raises(ParameterError):
            KernelSpec("phi", gamma=1.0).validate()
        with pytest.raises(ParameterError):
            KernelSpec("p", alpha=0.5, theta=0.1).validate()
        with pytest.raises(DomainError):
            phi_kernel(0.5, 1.0, 0.0)


class TestValidators:
    @pytest.mark.parametrize("spec", [
        KernelSpec("phi", gamma=0.3),
        KernelSpec("phi", gamma=0.7),
        KernelSpec("p", alpha=0.5),
        KernelSpec("half", alpha=1.0),
        KernelSpec("half", alpha=1.5),
    ])
    def test_unit_mass(self, spec, cfg):
        assert kernel_mass(spec, 1.3, cfg) == pytest.approx(1.0, abs=1e-7)

    def test_tail_mass(self):
        assert kernel_tail_mass(KernelSpec("half", alpha=1.0), 1.0, 1.0) == pytest.approx(0.5)
        assert kernel_tail_mass(KernelSpec("f", alpha=1.0, gamma=0.5, beta=0.5), 1.0, 10.0) is None

    @pytest.mark.parametrize("spec", [
        KernelSpec("phi", gamma=0.4),
        KernelSpec("p", alpha=0.7),
        KernelSpec("half", alpha=1.0),
    ])
    def test_laplace_characterization(self, spec, cfg):
        assert max(kernel_laplace_check(spec, 1.0, [0.5, 1.0, 2.0], cfg)) <= 1e-7

    def test_cosine_half_kernel_by_fourier_route(self, cfg):
        # integral of cos(sqrt(lambda) s) (2/pi) t / (s^2 + t^2) ds = e^{-sqrt(lambda) t}
        assert max(kernel_laplace_check(KernelSpec("half", alpha=2.0), 1.0, [1.0, 4.0], cfg)) <= 1e-8

    def test_negative_lambda_rejected(self, cfg):
        with pytest.raises(ParameterError):
            kernel_laplace_check(KernelSpec("p", alpha=0.5), 1.0, [-1.0], cfg)

    def test_corrected_yosida_variant_is_selected(self, cfg):
        assert validate_yosida_variant(0.5, cfg=cfg) == "corrected"


def test_kernel_table_layout(cfg):
    df = kernel_table(KernelSpec("half", alpha=1.0), [1.0, 2.0], [0.5, 1.0, 1.5], cfg)
    assert list(df.columns) == KERNEL_COLUMNS
    assert len(df) == 6
    assert list(df['t']) == [1.0, 1.0, 1.0, 2.0, 2.0, 2.0]
    np.testing.assert_allclose(df['value'], [half_power_kernel(1.0, t, s) for t in (1.0, 2.0)
                                             for s in (0.5, 1.0, 1.5)])
