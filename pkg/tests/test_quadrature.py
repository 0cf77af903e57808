import math

import numpy as np
import pytest

from utils.errors import ParameterError, QuadratureError
from utils.quadrature import (
    QuadratureConfig, fourier_cos_integral, integrate_algebraic, integrate_log, quad_vec_complex, worker_count,
)


def oscillating(s):
    return math.cos(40.0 * s) / (1.0 + s * s)


class TestConfig:
    def test_from_env(self, monkeypatch):
        monkeypatch.setenv('FRACRES_REL_TOL', '1e-8')
        monkeypatch.setenv('FRACRES_QUAD_ERROR_GATE', '50')
        cfg = QuadratureConfig.from_env()
        assert cfg.rel_tol == 1e-8
        assert cfg.error_gate == 50.0

    def test_invalid_settings(self, monkeypatch):
        with pytest.raises(ParameterError):
            QuadratureConfig(error_gate=0.5).validate()
        with pytest.raises(ParameterError):
            QuadratureConfig(max_subdiv=0).validate()
        monkeypatch.setenv('FRACRES_ABS_TOL', 'tiny')
        with pytest.raises(ParameterError):
            QuadratureConfig.from_env()

    def test_with_tolerance_only_tightens(self, cfg):
        assert cfg.with_tolerance(None) is cfg
        assert cfg.with_tolerance(1e-6).rel_tol == cfg.rel_tol
        assert cfg.with_tolerance(1e-12).rel_tol == 1e-12

    def test_worker_count(self, monkeypatch):
        monkeypatch.setenv('FRACRES_THREADS', '3')
        assert worker_count() == 3
        monkeypatch.setenv('FRACRES_THREADS', '-1')
        with pytest.raises(ParameterError):
            worker_count()


class TestIntegrators:
    def test_log_variable_integral(self, cfg):
        # integral of s^{-1/2} e^{-s} over (0, inf) = sqrt(pi)
        value, _ = integrate_log(lambda s: math.exp(-s) / math.sqrt(s), cfg, upper=200.0)
        assert value == pytest.approx(math.sqrt(math.pi), rel=1e-10)

    def test_complex_vector_integral(self, cfg):
        value, _ = quad_vec_complex(lambda x: np.array([np.exp(1j * x), x]), 0.0, math.pi, cfg)
        np.testing.assert_allclose(value, [2.0j, math.pi ** 2 / 2.0], atol=1e-10)

    def test_fourier_integral(self, cfg):
        # integral of cos(a s) / (1 + s^2) over [0, inf) = pi e^{-a} / 2
        value, _ = fourier_cos_integral(lambda s: 1.0 / (1.0 + s * s), 2.0, cfg)
        assert value == pytest.approx(0.5 * math.pi * math.exp(-2.0), abs=1e-10)

    def test_algebraic_weight(self, cfg):
        # integral over [0, 1] of (1 - s)^{-1/2} = 2
        value, _ = integrate_algebraic(lambda s: 1.0, 1.0, -0.5, cfg)
        assert value == pytest.approx(2.0, rel=1e-12)


class TestFailures:
    def test_unconverged_integral_raises(self):
        starved = QuadratureConfig(max_subdiv=1)
        with pytest.raises(QuadratureError, match="error estimate"):
            integrate_log(oscillating, starved, upper=20.0)

    def test_wide_error_gate_accepts_the_same_integral(self):
        lenient = QuadratureConfig(max_subdiv=1, error_gate=1e30)
        value, error = integrate_log(oscillating, lenient, upper=20.0)
        assert math.isfinite(value) and error > 0
