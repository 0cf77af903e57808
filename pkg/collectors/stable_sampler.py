"""
Monte Carlo side of subordination: one-sided stable samples and the
estimators they drive for fractional, power and composed solutions.
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np
from scipy import integrate, special, stats

from utils.errors import DomainError, ParameterError
from utils.kernels import p_kernel
from utils.quadrature import worker_count

logger = logging.getLogger(__name__)

STREAM_SIZE = 16384

Evaluator = Callable[[float], np.ndarray]


@dataclass
class StableSampler:
    """Positive stable law of index alpha with E exp(-lambda S) = exp(-lambda^alpha)."""
    alpha: float
    seed: int
    count: int

    def validate(self) -> None:
        if not 0 < self.alpha < 1:
            raise ParameterError(f"stable index must lie in (0, 1), got {self.alpha}")
        if self.count < 2:
            raise ParameterError(f"need at least 2 samples, got {self.count}")
        if not 0 <= self.seed < 2 ** 64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def streams(self) -> int:
        return -(-self.count // STREAM_SIZE)

    def generator(self, stream: int) -> np.random.Generator:
        """Counter-based generator for one stream; depends only on (seed, stream)."""
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(self.seed, spawn_key=(stream,))))

    def derive(self, alpha: float, offset: int) -> 'StableSampler':
        """A sampler with another index whose streams do not overlap this one's."""
        return StableSampler(alpha, (self.seed + offset) % 2 ** 64, self.count)


def _draw(alpha: float, rng: np.random.Generator, n: int) -> np.ndarray:
    # Chambers-Mallows-Stuck for the totally skewed case, written in Kanter's form
    u = math.pi * (1.0 - rng.random(n))
    w = np.maximum(rng.standard_exponential(n), np.finfo(float).tiny)
    a = np.sin(alpha * u) / np.sin(u) ** (1.0 / alpha)
    b = (np.sin((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha)
    return a * b


def sample_stable(s: StableSampler) -> np.ndarray:
    """
    i.i.d. positive stable samples, generated stream by stream in parallel.

    The stream split depends on the count only, so identical (alpha, seed,
    count) reproduce the same array bit for bit on any worker count.
    """
    s.validate()
    sizes = [min(STREAM_SIZE, s.count - k * STREAM_SIZE) for k in range(s.streams)]

    def stream(k: int) -> np.ndarray:
        return _draw(s.alpha, s.generator(k), sizes[k])

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        parts = list(pool.map(stream, range(s.streams)))
    samples = np.concatenate(parts)
    logger.debug(f"drew {samples.size} stable({s.alpha}) samples over {s.streams} streams, seed {s.seed}")
    return samples


def _estimate(u_eval: Evaluator, times: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    values = np.array([np.atleast_1d(np.asarray(u_eval(float(tau)))) for tau in times])
    n = values.shape[0]
    estimate = values.mean(axis=0)
    stderr = values.std(axis=0, ddof=1) / math.sqrt(n)
    return estimate, stderr


def _check_time(t: float) -> None:
    if not t > 0:
        raise DomainError(f"time must be positive, got {t}")


def _check_index(alpha: float, s: StableSampler) -> None:
    if not math.isclose(alpha, s.alpha, rel_tol=0.0, abs_tol=1e-15):
        raise ParameterError(f"sampler index {s.alpha} does not match alpha={alpha}")


def mc_fractional_solution(u_eval: Evaluator, alpha: float, t: float,
                           s: StableSampler) -> Tuple[np.ndarray, np.ndarray]:
    """
    Average of u(E(t)) with E(t) = (t/S)^alpha, the inverse stable time.

    For u(s) = T(s)x this estimates the fractional solution S_alpha(t)x.

    Returns:
        (estimate, componentwise standard error)
    """
    _check_time(t)
    _check_index(alpha, s)
    samples = sample_stable(s)
    estimate, stderr = _estimate(u_eval, (t / samples) ** alpha)
    logger.info(f"fractional MC estimate at t={t}, alpha={alpha}: {estimate} +/- {stderr}")
    return estimate, stderr


def mc_power_solution(u_eval: Evaluator, alpha: float, t: float,
                      s: StableSampler) -> Tuple[np.ndarray, np.ndarray]:
    """Average of u(D(t)) with D(t) = t^{1/alpha} S; targets e^{-t A^alpha}x."""
    _check_time(t)
    _check_index(alpha, s)
    samples = sample_stable(s)
    estimate, stderr = _estimate(u_eval, t ** (1.0 / alpha) * samples)
    logger.info(f"power MC estimate at t={t}, alpha={alpha}: {estimate} +/- {stderr}")
    return estimate, stderr


def mc_composed_solution(u_eval: Evaluator, beta: float, gamma: float, t: float,
                         s: StableSampler) -> Tuple[np.ndarray, np.ndarray]:
    """
    Average of u(D(E(t))): E of index gamma, then D of index beta.

    For u(s) = e^{-s rho} the target is E_gamma(-t^gamma rho^beta). ``s``
    supplies the seed and count; its index is ignored.
    """
    _check_time(t)
    inner = sample_stable(s.derive(gamma, 0))
    outer = sample_stable(s.derive(beta, 1))
    times = (t / inner) ** gamma
    estimate, stderr = _estimate(u_eval, times ** (1.0 / beta) * outer)
    logger.info(f"composed MC estimate at t={t}, beta={beta}, gamma={gamma}: {estimate} +/- {stderr}")
    return estimate, stderr


@dataclass
class LaplaceCheck:
    """One Laplace-transform check of the sampler."""
    alpha: float
    lam: float
    estimate: float
    stderr: float
    exact: float

    @property
    def passed(self) -> bool:
        return abs(self.estimate - self.exact) <= 3.0 * self.stderr


def laplace_validation(alphas: Sequence[float] = (0.3, 0.5, 0.7),
                       lambdas: Sequence[float] = (0.5, 1.0, 2.0),
                       seed: int = 20240601, count: int = 100_000) -> List[LaplaceCheck]:
    """Compare mean(e^{-lambda S}) with e^{-lambda^alpha} for every (alpha, lambda)."""
    checks = []
    for alpha in alphas:
        samples = sample_stable(StableSampler(alpha, seed, count))
        for lam in lambdas:
            values = np.exp(-lam * samples)
            checks.append(LaplaceCheck(
                alpha=alpha, lam=lam, estimate=float(values.mean()),
                stderr=float(values.std(ddof=1) / math.sqrt(values.size)),
                exact=math.exp(-lam ** alpha)))
    failed = [c for c in checks if not c.passed]
    if failed:
        logger.warning(f"{len(failed)} of {len(checks)} Laplace checks outside 3 standard errors")
    return checks


def stable_cdf(alpha: float, t: float, nodes: int = 2001) -> Callable[[np.ndarray], np.ndarray]:
    """
    CDF of D(t) = t^{1/alpha} S built from the density p_alpha(t, .).

    alpha = 1/2 is erfc(t / (2 sqrt(s))); otherwise the density is
    accumulated on a logarithmic grid around the scale t^{1/alpha}.
    """
    _check_time(t)
    if alpha == 0.5:
        return lambda s: special.erfc(t / (2.0 * np.sqrt(np.maximum(s, 1e-300))))
    centre = math.log(t) / alpha
    v = np.linspace(centre - 12.0, centre + 12.0 / alpha, nodes)
    density = np.array([p_kernel(alpha, t, math.exp(x)) * math.exp(x) for x in v])
    cdf = integrate.cumulative_trapezoid(density, v, initial=0.0)
    cdf = np.clip(cdf, 0.0, 1.0)

    def evaluate(s):
        return np.interp(np.log(np.maximum(s, 1e-300)), v, cdf, left=0.0, right=cdf[-1])
    return evaluate


def kolmogorov_distance(s: StableSampler, t: float = 1.0) -> float:
    """Kolmogorov-Smirnov distance between t^{1/alpha} S samples and p_alpha(t, .)."""
    samples = t ** (1.0 / s.alpha) * sample_stable(s)
    result = stats.kstest(samples, stable_cdf(s.alpha, t))
    logger.debug(f"KS distance for alpha={s.alpha}, t={t}: {result.statistic:.4g}")
    return float(result.statistic)
