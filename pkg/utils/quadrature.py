"""
Quadrature configuration and the integration engines shared by the
numerical modules: log-variable improper integrals, complex vector
integrals, trapezoid rules on contour rays, Fourier and algebraic-weight
integrals.
"""

import os
import logging
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from utils.errors import ParameterError, QuadratureError

logger = logging.getLogger(__name__)


def env_float(name: str, default: float) -> float:
    """Read a float setting from the environment."""
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError:
        raise ParameterError(f"{name} must be a number, got {raw!r}")


def env_int(name: str, default: int) -> int:
    """Read an integer setting from the environment."""
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ParameterError(f"{name} must be an integer, got {raw!r}")


def worker_count() -> int:
    """Worker cap from FRACRES_THREADS; 0 means one per CPU."""
    threads = env_int('FRACRES_THREADS', 0)
    if threads < 0:
        raise ParameterError(f"FRACRES_THREADS must be >= 0, got {threads}")
    if threads == 0:
        return os.cpu_count() or 1
    return threads


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and limits for improper and contour integrals."""
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    truncation: float = 1e40
    max_subdiv: int = 200
    contour_margin: float = 1e-8
    error_gate: float = 1e3

    @classmethod
    def from_env(cls) -> 'QuadratureConfig':
        """Build a config from FRACRES_* environment variables."""
        cfg = cls(
            rel_tol=env_float('FRACRES_REL_TOL', cls.rel_tol),
            abs_tol=env_float('FRACRES_ABS_TOL', cls.abs_tol),
            truncation=env_float('FRACRES_TRUNCATION', cls.truncation),
            max_subdiv=env_int('FRACRES_MAX_SUBDIV', cls.max_subdiv),
            error_gate=env_float('FRACRES_QUAD_ERROR_GATE', cls.error_gate),
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ParameterError(
                f"tolerances must be positive (rel_tol={self.rel_tol}, abs_tol={self.abs_tol})")
        if not self.truncation > 0:
            raise ParameterError(f"truncation must be positive, got {self.truncation}")
        if self.max_subdiv < 1:
            raise ParameterError(f"max_subdiv must be >= 1, got {self.max_subdiv}")
        if self.contour_margin < 0:
            raise ParameterError(f"contour_margin must be >= 0, got {self.contour_margin}")
        if not self.error_gate >= 1:
            raise ParameterError(f"error_gate must be >= 1, got {self.error_gate}")

    def with_tolerance(self, tol: Optional[float]) -> 'QuadratureConfig':
        """Copy with rel_tol (and abs_tol, scaled) replaced by tol."""
        if tol is None:
            return self
        if not tol > 0:
            raise ParameterError(f"tolerance must be positive, got {tol}")
        return replace(self, rel_tol=min(self.rel_tol, tol), abs_tol=min(self.abs_tol, tol * 1e-2))


def _check(value, error, what: str, cfg: QuadratureConfig):
    """Reject non-finite results and error estimates beyond error_gate times the target."""
    if not np.all(np.isfinite(value)):
        raise QuadratureError(f"{what}: non-finite result")
    scale = np.max(np.abs(value)) if np.size(value) else 0.0
    target = max(cfg.abs_tol, cfg.rel_tol * scale)
    if not error <= cfg.error_gate * target:
        raise QuadratureError(f"{what}: error estimate {error:.3e} above {cfg.error_gate:g} x target {target:.3e}")
    if error > target:
        logger.debug(f"{what}: error estimate {error:.3e} above target {target:.3e}")


def integrate_log(f: Callable[[float], float], cfg: QuadratureConfig,
                  upper: Optional[float] = None, centre: float = 0.0,
                  points: Sequence[float] = ()) -> Tuple[float, float]:
    """
    Integrate a real function over (0, upper] in the variable v = ln s.

    Integrable power singularities at s = 0 and algebraic tails become
    exponential decay in v. The half below ``centre`` (a log-scale) goes to
    QUADPACK's infinite-interval rule, the rest is split at ``points``.

    Returns:
        (value, error estimate)
    """
    upper = cfg.truncation if upper is None else upper
    v_hi = float(np.log(upper))

    def g(v):
        s = np.exp(v)
        return f(s) * s if s > 0 else 0.0

    v_mid = min(centre, v_hi)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        left, e_left = integrate.quad(g, -np.inf, v_mid, epsabs=cfg.abs_tol,
                                      epsrel=cfg.rel_tol, limit=cfg.max_subdiv)
        right, e_right = 0.0, 0.0
        if v_hi > v_mid:
            breaks = sorted(p for p in points if v_mid < p < v_hi)
            right, e_right = integrate.quad(g, v_mid, v_hi, epsabs=cfg.abs_tol,
                                            epsrel=cfg.rel_tol, limit=cfg.max_subdiv,
                                            points=breaks or None)
    value, error = left + right, e_left + e_right
    _check(value, error, "log-variable integral", cfg)
    return value, error


def quad_vec_complex(f: Callable[[float], np.ndarray], a: float, b: float,
                     cfg: QuadratureConfig, points: Optional[Sequence[float]] = None
                     ) -> Tuple[np.ndarray, float]:
    """
    Adaptive Gauss-Kronrod for complex array-valued integrands.

    The complex values are flattened into one real vector so scipy's
    quad_vec refines all components on a common subdivision.
    """
    shape = None

    def real_view(x):
        nonlocal shape
        val = np.asarray(f(x), dtype=complex)
        shape = val.shape
        return np.concatenate([val.real.ravel(), val.imag.ravel()])

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        res, err = integrate.quad_vec(real_view, a, b, epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
                                      limit=max(cfg.max_subdiv, 2000), points=points)
    half = res.size // 2
    value = (res[:half] + 1j * res[half:]).reshape(shape)
    _check(value, err, "vector integral", cfg)
    return value, float(err)


def ray_integral(g: Callable[[np.ndarray], np.ndarray], cfg: QuadratureConfig,
                 v_range: Tuple[float, float] = (-230.0, 60.0),
                 h0: float = 0.125, max_levels: int = 8) -> complex:
    """
    Integrate a complex function of rho over (0, inf) along a ray.

    Uses rho = e^v and the trapezoid rule, which converges geometrically
    for integrands analytic in a strip around the real v-axis. The range
    is trimmed on a coarse grid to where the envelope matters, then the
    step is halved until two levels agree.

    Args:
        g: vectorised integrand, called with an array of rho > 0
        cfg: quadrature tolerances
        v_range: search window for ln rho

    Returns:
        complex value of the integral
    """
    def G(v):
        rho = np.exp(v)
        with np.errstate(over='ignore', under='ignore', invalid='ignore'):
            return np.asarray(g(rho), dtype=complex) * rho

    coarse = np.arange(v_range[0], v_range[1] + 0.25, 0.25)
    vals = G(coarse)
    env = np.where(np.isfinite(vals), np.abs(vals), np.inf)
    finite = env[np.isfinite(env)]
    peak = finite.max() if finite.size else 0.0
    if peak == 0.0:
        return 0.0j
    keep = np.nonzero(env > peak * 1e-18)[0]
    lo, hi = keep[0], keep[-1]
    if not np.all(np.isfinite(env[lo:hi + 1])):
        raise QuadratureError("ray integrand overflows inside its significant range")
    a = coarse[max(lo - 4, 0)]
    b = coarse[min(hi + 4, coarse.size - 1)]

    n = max(int(np.ceil((b - a) / h0)), 2)
    h = (b - a) / n
    nodes = a + h * np.arange(n + 1)
    vals = G(nodes)
    total = h * (vals.sum() - 0.5 * (vals[0] + vals[-1]))
    for level in range(max_levels):
        mids = nodes[:-1] + 0.5 * h
        refined = 0.5 * total + 0.5 * h * G(mids).sum()
        diff = abs(refined - total)
        nodes = np.sort(np.concatenate([nodes, mids]))
        h *= 0.5
        total = refined
        if diff <= max(cfg.abs_tol, cfg.rel_tol * abs(total)):
            logger.debug(f"ray integral converged at h={h:.2e} over v in [{a:.1f}, {b:.1f}]")
            return complex(total)
    if diff > cfg.error_gate * max(cfg.abs_tol, cfg.rel_tol * abs(total)):
        raise QuadratureError(
            f"ray trapezoid did not converge: last correction {diff:.3e}, value {total:.6e}")
    logger.warning(f"ray trapezoid stopped with correction {diff:.3e}")
    return complex(total)


def fourier_cos_integral(f: Callable[[float], float], omega: float,
                         cfg: QuadratureConfig) -> Tuple[float, float]:
    """
    Integral of f(s) cos(omega s) over [0, inf) for slowly decaying f.

    QUADPACK's QAWF integrates cycle by cycle and accelerates the partial
    sums with the epsilon algorithm.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, error = integrate.quad(f, 0.0, np.inf, weight='cos', wvar=omega,
                                      epsabs=cfg.abs_tol, limlst=200, limit=cfg.max_subdiv)
    _check(value, error, "Fourier integral", cfg)
    return value, error


def integrate_algebraic(h: Callable[[float], float], t: float, exponent: float,
                        cfg: QuadratureConfig) -> Tuple[float, float]:
    """Integral over [0, t] of (t - s)^exponent h(s), Gauss-Jacobi style weighting."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, error = integrate.quad(h, 0.0, t, weight='alg', wvar=(0.0, exponent),
                                      epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
                                      limit=cfg.max_subdiv)
    _check(value, error, "algebraic-weight integral", cfg)
    return value, error
