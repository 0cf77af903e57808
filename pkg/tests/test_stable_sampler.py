import math

import numpy as np
import pytest
from scipy import special

from collectors.stable_sampler import (
    STREAM_SIZE, StableSampler, kolmogorov_distance, laplace_validation, mc_composed_solution,
    mc_fractional_solution, mc_power_solution, sample_stable, stable_cdf,
)
from utils.errors import DomainError, ParameterError

SEED = 20240601


def relax(s):
    return math.exp(-s)


class TestSampler:
    def test_reproducible_across_worker_counts(self, monkeypatch):
        s = StableSampler(0.6, SEED, 3 * STREAM_SIZE + 17)
        monkeypatch.setenv('FRACRES_THREADS', '1')
        serial = sample_stable(s)
        monkeypatch.setenv('FRACRES_THREADS', '4')
        parallel = sample_stable(s)
        np.testing.assert_array_equal(serial, parallel)
        assert serial.size == s.count
        assert s.streams == 4

    def test_seed_changes_samples(self):
        a = sample_stable(StableSampler(0.5, 1, 1000))
        b = sample_stable(StableSampler(0.5, 2, 1000))
        assert not np.array_equal(a, b)

    def test_samples_are_positive_and_finite(self):
        samples = sample_stable(StableSampler(0.3, SEED, 50_000))
        assert np.all(samples > 0)
        assert np.all(np.isfinite(samples))

    def test_validation(self):
        with pytest.raises(ParameterError):
            StableSampler(1.0, 0, 100).validate()
        with pytest.raises(ParameterError):
            StableSampler(0.5, 0, 1).validate()
        with pytest.raises(ParameterError):
            StableSampler(0.5, -1, 100).validate()

    def test_derived_streams_differ(self):
        s = StableSampler(0.5, SEED, 1000)
        assert s.derive(0.5, 1).seed == SEED + 1
        assert not np.array_equal(sample_stable(s), sample_stable(s.derive(0.5, 1)))


class TestEstimators:
    def test_constant_observable_is_exact(self):
        est, err = mc_fractional_solution(lambda s: 1.0, 0.5, 1.0, StableSampler(0.5, SEED, 1000))
        assert est[0] == 1.0
        assert err[0] == 0.0

    def test_fractional_relaxation(self):
        est, err = mc_fractional_solution(relax, 0.5, 1.0, StableSampler(0.5, SEED, 100_000))
        assert abs(est[0] - special.erfcx(1.0)) <= 5.0 * err[0]

    def test_power_relaxation(self):
        est, err = mc_power_solution(relax, 0.5, 2.0, StableSampler(0.5, SEED, 100_000))
        assert abs(est[0] - math.exp(-2.0)) <= 5.0 * err[0]

    def test_composed_times(self):
        # beta = 1/2 and gamma = 1/2 give E_{1/2}(-t^{1/2} rho^{1/2}) = erfcx(1) at t = rho = 1
        est, err = mc_composed_solution(relax, 0.5, 0.5, 1.0, StableSampler(0.5, SEED, 100_000))
        assert abs(est[0] - special.erfcx(1.0)) <= 5.0 * err[0]

    def test_vector_observable(self):
        rates = np.array([0.5, 2.0])
        est, err = mc_power_solution(lambda s: np.exp(-s * rates), 0.5, 1.0, StableSampler(0.5, SEED, 50_000))
        assert est.shape == (2,) and err.shape == (2,)
        assert np.all(np.abs(est - np.exp(-np.sqrt(rates))) <= 5.0 * err)

    def test_index_and_time_checks(self):
        with pytest.raises(ParameterError):
            mc_fractional_solution(relax, 0.7, 1.0, StableSampler(0.5, SEED, 100))
        with pytest.raises(DomainError):
            mc_power_solution(relax, 0.5, 0.0, StableSampler(0.5, SEED, 100))


class TestDistribution:
    def test_laplace_transform(self):
        for check in laplace_validation(alphas=(0.5,), count=100_000):
            assert abs(check.estimate - check.exact) <= 5.0 * check.stderr
            assert check.exact == pytest.approx(math.exp(-math.sqrt(check.lam)))

    def test_levy_cdf(self):
        cdf = stable_cdf(0.5, 1.0)
        values = cdf(np.array([0.01, 0.1, 1.0, 10.0, 1e6]))
        assert np.all(np.diff(values) > 0)
        assert values[-1] == pytest.approx(1.0, abs=1e-3)

    def test_numerical_cdf_reaches_one(self):
        cdf = stable_cdf(0.7, 1.0)
        assert float(cdf(np.array([1e12]))[0]) == pytest.approx(1.0, abs=1e-3)
        assert float(cdf(np.array([1e-6]))[0]) == pytest.approx(0.0, abs=1e-6)

    def test_ks_distance_half(self):
        assert kolmogorov_distance(StableSampler(0.5, SEED, 100_000)) <= 0.01

    @pytest.mark.slow
    def test_ks_distance_numerical_cdf(self):
        assert kolmogorov_distance(StableSampler(0.7, SEED, 100_000)) <= 0.01
