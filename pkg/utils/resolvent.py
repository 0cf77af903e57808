"""
Alpha-times resolvent families S_alpha(t) = E_alpha(-t^alpha A) of matrix
generators and the residuals of their defining identities.

Sign convention: a ResolventFamily stores A, and -A is the generator.
"""

import math
import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy import linalg, special

from utils.errors import (
    ContourError, DomainError, ParameterError, SeriesDivergenceError, SpectralMethodError,
    TailBoundError,
)
from utils.linop import MatrixOperator, analyticity_angle, real_if_close, spectral_angle
from utils.quadrature import QuadratureConfig, integrate_algebraic, quad_vec_complex
from utils.specfun import g_convolve, ml, precision_context

logger = logging.getLogger(__name__)

METHODS = ("spectral", "contour", "series")

SERIES_GUARD = 30.0
SERIES_DOUBLE_LIMIT = 5.0


@dataclass
class ResolventFamily:
    """S_alpha(t) generated by -generator."""
    generator: MatrixOperator
    alpha: float
    method: str = "spectral"

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise ParameterError(f"resolvent family order must lie in (0, 2], got {self.alpha}")
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}; choose from {METHODS}")

    @property
    def dim(self) -> int:
        return self.generator.dim


def _series_numpy(A: MatrixOperator, alpha: float, beta: float, t: float) -> np.ndarray:
    step = -(t ** alpha) * A.entries
    term = np.eye(A.dim, dtype=complex)
    total = term * special.rgamma(beta)
    size = (t ** alpha) * A.norm()
    for k in range(1, 2000):
        term = term @ step
        contrib = term * special.rgamma(alpha * k + beta)
        total = total + contrib
        if k * alpha + beta > 2 and size ** k * special.rgamma(alpha * k + beta) < 1e-17:
            return total
    raise SeriesDivergenceError("matrix Mittag-Leffler series did not settle")


def _series_mp(A: MatrixOperator, alpha: float, beta: float, t: float) -> np.ndarray:
    size = (t ** alpha) * A.norm()
    spread = size ** (1.0 / alpha)
    dps = 20 + int(math.ceil(spread / math.log(10.0)))
    k_min = int(math.ceil(spread / alpha)) + 1
    ctx = precision_context(dps)
    step = ctx.matrix((-(t ** alpha) * A.entries).tolist())
    term = ctx.eye(A.dim)
    total = term * ctx.rgamma(beta)
    eps = ctx.mpf(10) ** (-dps)
    k = 0
    while True:
        k += 1
        term = term * step
        contrib = term * ctx.rgamma(alpha * k + beta)
        total += contrib
        if k > k_min and ctx.mnorm(contrib, 1) <= eps * max(ctx.mnorm(total, 1), eps):
            break
        if k > 100000:
            raise SeriesDivergenceError("extended-precision matrix series did not settle")
    return np.array(total.tolist(), dtype=complex)


def mittag_leffler_matrix(A: MatrixOperator, alpha: float, beta: float, t: float,
                          method: str = "auto") -> np.ndarray:
    """
    E_{alpha,beta}(-t^alpha A) as a matrix.

    Args:
        method: "spectral", "series" or "auto" (spectral when A is
            diagonalizable, series otherwise)
    """
    if t < 0:
        raise DomainError(f"time must be >= 0, got {t}")
    if method == "auto":
        method = "spectral" if A.diagonalizable else "series"
    if method == "spectral":
        if not A.diagonalizable:
            raise SpectralMethodError("spectral route needs a diagonalizable generator")
        m = A.apply_function(lambda w: ml(-(t ** alpha) * w, alpha, beta))
    elif method == "series":
        size = (t ** alpha) * A.norm()
        if size > SERIES_GUARD:
            raise SeriesDivergenceError(
                f"t^alpha ||A|| = {size:.4g} exceeds the series guard {SERIES_GUARD}")
        if size <= SERIES_DOUBLE_LIMIT:
            m = _series_numpy(A, alpha, beta, t)
        else:
            m = _series_mp(A, alpha, beta, t)
    else:
        raise ParameterError(f"unknown matrix Mittag-Leffler method {method!r}")
    return real_if_close(m, A)


def analyticity_of(F: ResolventFamily) -> float:
    """Analyticity angle theta0 implied by the generator's spectral angle."""
    return analyticity_angle(F.alpha, spectral_angle(F.generator))


def contour_s_alpha(F: ResolventFamily, t: float,
                    cfg: Optional[QuadratureConfig] = None) -> np.ndarray:
    """
    S_alpha(t) from (1/2 pi i) times the integral of e^{lambda t} lambda^{alpha-1}(lambda^alpha + A)^{-1}.

    The path is the hyperbola lambda(u) = mu (1 + sin(iu - delta)) with
    mu = 2/t and delta = theta0/2, so every pole lambda^alpha = -a lies to
    its left.

    Raises:
        ContourError: the family is not analytic (theta0 <= 0)
    """
    if not t > 0:
        raise DomainError(f"contour evaluation needs t > 0, got {t}")
    cfg = cfg or QuadratureConfig.from_env()
    A, alpha = F.generator, F.alpha
    theta0 = analyticity_of(F)
    if theta0 <= 0:
        raise ContourError(f"no analytic sector for alpha={alpha} (theta0={theta0:.4f}); "
                           "the hyperbola would cross the poles")
    delta = 0.5 * theta0
    mu = 2.0 / t
    u_max = math.acosh(21.0 / math.sin(delta) + 1.0)
    eye = np.eye(A.dim, dtype=complex)

    def integrand(u):
        w = 1j * u - delta
        lam = mu * (1.0 + np.sin(w))
        d_lam = mu * np.cos(w)
        inner = linalg.solve(lam ** alpha * eye + A.entries, eye)
        return np.exp(lam * t) * lam ** (alpha - 1.0) * inner * d_lam / (2.0 * math.pi)

    value, _ = quad_vec_complex(integrand, -u_max, u_max, cfg)
    logger.debug(f"hyperbola S_alpha(t={t}) with delta={delta:.4f}, |u| <= {u_max:.2f}")
    return real_if_close(value, A)


def s_alpha_operator(F: ResolventFamily, t: float,
                     cfg: Optional[QuadratureConfig] = None) -> np.ndarray:
    """S_alpha(t) as a matrix by the family's method."""
    if t < 0:
        raise DomainError(f"time must be >= 0, got {t}")
    if t == 0:
        return np.eye(F.dim)
    if F.method == "contour":
        return contour_s_alpha(F, t, cfg)
    return mittag_leffler_matrix(F.generator, F.alpha, 1.0, t, method=F.method)


def s_alpha_apply(F: ResolventFamily, t: float, x: np.ndarray,
                  cfg: Optional[QuadratureConfig] = None) -> np.ndarray:
    """
    S_alpha(t) x = E_alpha(-t^alpha A) x.

    Raises:
        SpectralMethodError: method="spectral" on a non-diagonalizable generator
        SeriesDivergenceError: method="series" with t^alpha ||A|| > 30
    """
    x = np.asarray(x)
    if x.shape != (F.dim,):
        raise ParameterError(f"vector of length {F.dim} expected, got shape {x.shape}")
    return s_alpha_operator(F, t, cfg) @ x


def resolvent_equation_residual(F: ResolventFamily, t: float, x: np.ndarray,
                                cfg: Optional[QuadratureConfig] = None) -> float:
    """
    ||S(t)x - x - integral_0^t g_alpha(t - s) S(s)(-A)x ds||.

    The integral uses QUADPACK's algebraic weight (t - s)^{alpha - 1};
    S(s) evaluations are shared across components.
    """
    if t < 0:
        raise DomainError(f"time must be >= 0, got {t}")
    if t == 0:
        return 0.0
    cfg = cfg or QuadratureConfig.from_env()
    x = np.asarray(x, dtype=complex)
    ax = -(F.generator.entries @ x)
    cache: Dict[float, np.ndarray] = {}

    def family_at(s: float) -> np.ndarray:
        if s not in cache:
            cache[s] = s_alpha_operator(F, s, cfg) @ ax
        return cache[s]

    integral = np.zeros(F.dim, dtype=complex)
    for c in range(F.dim):
        re, _ = integrate_algebraic(lambda s: family_at(s)[c].real, t, F.alpha - 1.0, cfg)
        im = 0.0
        if np.iscomplexobj(family_at(0.5 * t)) and np.any(family_at(0.5 * t).imag != 0):
            im, _ = integrate_algebraic(lambda s: family_at(s)[c].imag, t, F.alpha - 1.0, cfg)
        integral[c] = (re + 1j * im) * special.rgamma(F.alpha)
    lhs = s_alpha_operator(F, t, cfg) @ x
    return float(np.linalg.norm(lhs - x - integral))


def laplace_tail_bound(F: ResolventFamily, lam: complex, x: np.ndarray, T: float) -> float:
    """Bound on ||integral_T^inf e^{-lambda t} S(t)x dt|| from sampled family norms."""
    A = F.generator
    cond = 1.0
    if A.spectral_cache is not None:
        _, v, v_inv = A.spectral_cache
        cond = float(np.linalg.norm(v, 2) * np.linalg.norm(v_inv, 2))
    samples = T * np.array([1.0, 1.5, 2.0, 4.0, 8.0])
    peak = 1.0
    for s in samples:
        peak = max(peak, float(np.abs(ml(-(s ** F.alpha) * A.eigenvalues, F.alpha)).max()))
    return cond * peak * float(np.linalg.norm(x)) * math.exp(-lam.real * T) / lam.real


def laplace_identity_residual(F: ResolventFamily, lam: complex, x: np.ndarray, T: float,
                              cfg: Optional[QuadratureConfig] = None,
                              max_tail: float = 1e-3) -> float:
    """
    Excess of ||integral_0^T e^{-lambda t} S(t)x dt - lambda^{alpha-1}(lambda^alpha + A)^{-1} x||
    over the analytic tail bound of the truncated integral.

    Raises:
        TailBoundError: the tail bound itself exceeds max_tail (T too small)
    """
    lam = complex(lam)
    if not lam.real > 0:
        raise ParameterError(f"need Re lambda > 0, got {lam}")
    if not T > 0:
        raise DomainError(f"truncation T must be positive, got {T}")
    cfg = cfg or QuadratureConfig.from_env()
    x = np.asarray(x, dtype=complex)
    tail = laplace_tail_bound(F, lam, x, T)
    if tail > max_tail:
        raise TailBoundError(f"tail bound {tail:.3e} at T={T} exceeds {max_tail:.1e}")
    partial, _ = quad_vec_complex(lambda s: np.exp(-lam * s) * (s_alpha_operator(F, s, cfg) @ x),
                                  0.0, T, cfg)
    A = F.generator
    target = lam ** (F.alpha - 1.0) * linalg.solve(lam ** F.alpha * np.eye(A.dim) + A.entries, x)
    diff = float(np.linalg.norm(partial - target))
    logger.debug(f"Laplace identity: |diff|={diff:.3e}, tail bound={tail:.3e}")
    return max(0.0, diff - tail)


def truncated_expansion(F: ResolventFamily, t: float, x: np.ndarray, n: int) -> np.ndarray:
    """sum_{k<n} g_{k alpha + 1}(t) (-A)^k x."""
    if n < 1:
        raise ParameterError(f"expansion order must be >= 1, got {n}")
    x = np.asarray(x, dtype=complex)
    out = np.zeros_like(x)
    power = x.copy()
    for k in range(n):
        out = out + (t ** (k * F.alpha)) * special.rgamma(k * F.alpha + 1.0) * power
        power = -(F.generator.entries @ power)
    return out


def expansion_residual(F: ResolventFamily, t: float, x: np.ndarray, n: int,
                       cfg: Optional[QuadratureConfig] = None) -> float:
    """
    ||S(t)x - truncated_expansion - (g_{n alpha} * S)(t)(-A)^n x||.
    """
    cfg = cfg or QuadratureConfig.from_env()
    x = np.asarray(x, dtype=complex)
    power = x.copy()
    for _ in range(n):
        power = -(F.generator.entries @ power)
    remainder = g_convolve(n * F.alpha, lambda s: s_alpha_operator(F, s, cfg) @ power, t, cfg)
    lhs = s_alpha_apply(F, t, x, cfg)
    return float(np.linalg.norm(lhs - truncated_expansion(F, t, x, n) - remainder))
