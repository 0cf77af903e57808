"""
Scalar special functions: two-parameter Mittag-Leffler E_{alpha,beta},
the Wright-type function Psi_gamma, the convolution kernels g_beta and an
L1 oracle for the Caputo derivative.
"""

import math
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Tuple, Union

import mpmath
import numpy as np
from scipy import special

from utils.errors import (
    DomainError, GridError, ParameterError, RegimeFailure, SeriesDivergenceError,
    SymbolicDeltaError, WrightTruncationError,
)
from utils.quadrature import QuadratureConfig, env_float, env_int, integrate_log, quad_vec_complex, ray_integral
from utils.trajectory import Trajectory

logger = logging.getLogger(__name__)

Number = Union[float, complex]

SERIES = "series"
ASYMPTOTIC = "asymptotic"
LAPLACE = "laplace-inversion"

# Weideman-Trefethen parabola, tuned for t = 1
_PARABOLA = (0.1309, 0.1194, 0.25)


@dataclass(frozen=True)
class MLParams:
    """Orders of E_{alpha,beta}."""
    alpha: float
    beta: float = 1.0

    def validate(self) -> None:
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ParameterError(f"Mittag-Leffler alpha must be > 0, got {self.alpha}")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ParameterError(f"Mittag-Leffler beta must be > 0, got {self.beta}")


@dataclass(frozen=True)
class EvalRegime:
    """Regime chosen for one argument, with the thresholds that chose it."""
    tag: str
    r0: float
    R: float
    N: int


@dataclass(frozen=True)
class MLRegimeConfig:
    """Thresholds of the three-regime Mittag-Leffler evaluator."""
    series_radius: float = 1.0
    asymptotic_radius: float = 10.0
    laplace_nodes: int = 32
    asymptotic_tol: float = 1e-13
    max_series_terms: int = 5000

    @classmethod
    def from_env(cls) -> 'MLRegimeConfig':
        cfg = cls(
            series_radius=env_float('FRACRES_ML_SERIES_RADIUS', cls.series_radius),
            asymptotic_radius=env_float('FRACRES_ML_ASYMPTOTIC_RADIUS', cls.asymptotic_radius),
            laplace_nodes=env_int('FRACRES_ML_LAPLACE_NODES', cls.laplace_nodes),
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not 0 < self.series_radius < self.asymptotic_radius:
            raise ParameterError(
                f"need 0 < r0 < R, got r0={self.series_radius}, R={self.asymptotic_radius}")
        if self.laplace_nodes < 8:
            raise ParameterError(f"laplace_nodes must be >= 8, got {self.laplace_nodes}")


@dataclass(frozen=True)
class WrightConfig:
    """Limits of the extended-precision Wright series."""
    max_terms: int = 20000
    radius: float = 30.0

    @classmethod
    def from_env(cls) -> 'WrightConfig':
        cfg = cls(
            max_terms=env_int('FRACRES_WRIGHT_MAX_TERMS', cls.max_terms),
            radius=env_float('FRACRES_WRIGHT_RADIUS', cls.radius),
        )
        if cfg.max_terms < 1 or not cfg.radius > 0:
            raise ParameterError(f"invalid Wright limits: {cfg}")
        return cfg


@lru_cache(maxsize=1)
def default_regime_config() -> MLRegimeConfig:
    return MLRegimeConfig.from_env()


@lru_cache(maxsize=1)
def default_wright_config() -> WrightConfig:
    return WrightConfig.from_env()


def precision_context(dps: int) -> mpmath.MPContext:
    """A private mpmath context, so concurrent callers never share precision."""
    ctx = mpmath.MPContext()
    ctx.dps = dps
    return ctx


def asymptotic_terms(alpha: float) -> int:
    return int(math.ceil(10.0 / alpha))


def select_regime(p: MLParams, z: Number, cfg: Optional[MLRegimeConfig] = None) -> EvalRegime:
    """
    Planned regime for E_{alpha,beta}(z) by modulus.

    The asymptotic plan is only a candidate: mittag_leffler falls back to
    Laplace inversion when the expansion's own error estimate is too large.
    """
    p.validate()
    cfg = cfg or default_regime_config()
    r = abs(z)
    n = asymptotic_terms(p.alpha)
    if r <= cfg.series_radius:
        tag = SERIES
    elif p.alpha > 2:
        raise RegimeFailure(
            f"E_{{{p.alpha},{p.beta}}} needs |z| <= {cfg.series_radius} for alpha > 2, got |z|={r:.4g}")
    elif r >= cfg.asymptotic_radius and p.alpha < 2:
        tag = ASYMPTOTIC
    else:
        tag = LAPLACE
    return EvalRegime(tag=tag, r0=cfg.series_radius, R=cfg.asymptotic_radius, N=n)


def _series_length(alpha: float, beta: float, radius: float, max_terms: int) -> int:
    log_r = math.log(radius) if radius > 0 else -math.inf
    for k in range(1, max_terms + 1):
        if k * log_r - math.lgamma(alpha * k + beta) < -40.0 and alpha * k + beta > 2:
            return k
    raise SeriesDivergenceError(
        f"Mittag-Leffler series needs more than {max_terms} terms at |z|={radius:.4g}")


def _ml_series(alpha: float, beta: float, z: np.ndarray, cfg: MLRegimeConfig) -> np.ndarray:
    radius = float(np.max(np.abs(z))) if z.size else 0.0
    n_terms = _series_length(alpha, beta, max(radius, 1e-300), cfg.max_series_terms)
    k = np.arange(n_terms)
    weights = special.rgamma(alpha * k + beta)
    return (z[:, None] ** k[None, :] * weights[None, :]).sum(axis=1)


def _branch_range(alpha: float) -> range:
    reach = int(math.ceil(alpha / 2.0)) + 1
    return range(-reach, reach + 1)


def _ml_asymptotic(alpha: float, beta: float, z: np.ndarray,
                   cfg: MLRegimeConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Asymptotic expansion plus its error estimate gate."""
    n = asymptotic_terms(alpha)
    j = np.arange(1, n + 3)
    log_z = np.log(z)
    alg = -np.exp(-j[None, :] * log_z[:, None]) * special.rgamma(beta - alpha * j)[None, :]
    value = alg[:, :n].sum(axis=1)
    err = np.abs(alg[:, n:]).max(axis=1)

    mod, arg = np.abs(z), np.angle(z)
    root = mod ** (1.0 / alpha)
    for k in _branch_range(alpha):
        shifted = arg + 2.0 * np.pi * k
        inside = np.abs(shifted) < alpha * np.pi
        if not np.any(inside):
            continue
        phi = shifted / alpha
        zeta = root * np.exp(1j * phi)
        with np.errstate(over='ignore'):
            term = np.exp((1.0 - beta) * (np.log(root) + 1j * phi) + zeta) / alpha
        value = value + np.where(inside, term, 0.0)
    # a branch sitting on the cut contributes at most this much
    err = err + np.exp((1.0 - beta) * np.log(root) - root) / alpha
    with np.errstate(invalid='ignore'):
        ok = err <= cfg.asymptotic_tol * np.maximum(np.abs(value), 1e-300)
    return value, ok


def _ml_laplace(alpha: float, beta: float, z: np.ndarray, cfg: MLRegimeConfig) -> np.ndarray:
    """
    Invert s^{alpha-beta}/(s^alpha - z) at t = 1 on a parabolic contour.

    The principal-sheet poles are removed first and their residues added
    back, so the trapezoid sum only sees the branch cut.
    """
    n = cfg.laplace_nodes
    a0, a1, a2 = _PARABOLA
    theta = -np.pi + (np.arange(1, n + 1) - 0.5) * 2.0 * np.pi / n
    s = n * (a0 - a1 * theta ** 2 + 1j * a2 * theta)
    ds = n * (-2.0 * a1 * theta + 1j * a2)
    log_s = np.log(s)

    zc = z[:, None]
    G = np.exp((alpha - beta) * log_s)[None, :] / (np.exp(alpha * log_s)[None, :] - zc)
    residues = np.zeros(z.shape, dtype=complex)
    mod, arg = np.abs(z), np.angle(z)
    root = mod ** (1.0 / alpha)
    for k in _branch_range(alpha):
        phi = (arg + 2.0 * np.pi * k) / alpha
        on_sheet = (phi > -np.pi) & (phi <= np.pi)
        if not np.any(on_sheet):
            continue
        pole = root * np.exp(1j * phi)
        c = np.exp((1.0 - beta) * (np.log(root) + 1j * phi)) / alpha
        c = np.where(on_sheet, c, 0.0)
        G = G - c[:, None] / (s[None, :] - pole[:, None])
        residues = residues + c * np.exp(pole)
    contour = (np.exp(s)[None, :] * G * ds[None, :]).sum(axis=1) / (1j * n)
    return residues + contour


def mittag_leffler(p: MLParams, z, cfg: Optional[MLRegimeConfig] = None):
    """
    Two-parameter Mittag-Leffler function E_{alpha,beta}(z).

    Args:
        p: orders alpha, beta (both > 0)
        z: scalar or array argument, real or complex
        cfg: regime thresholds (defaults from the environment)

    Returns:
        E_{alpha,beta}(z), real when z is real, same shape as z
    """
    p.validate()
    cfg = cfg or default_regime_config()
    alpha, beta = float(p.alpha), float(p.beta)
    z_arr = np.asarray(z)
    real_input = not np.iscomplexobj(z_arr)
    flat = np.atleast_1d(z_arr).astype(complex).ravel()
    if not np.all(np.isfinite(flat)):
        raise DomainError("Mittag-Leffler argument must be finite")

    out = np.empty_like(flat)
    mod = np.abs(flat)
    series = mod <= cfg.series_radius
    if np.any(series):
        out[series] = _ml_series(alpha, beta, flat[series], cfg)
    rest = np.nonzero(~series)[0]
    if rest.size:
        if alpha > 2:
            raise RegimeFailure(
                f"alpha={alpha} > 2 is only supported inside |z| <= {cfg.series_radius}")
        pending = rest
        if alpha < 2:
            far = rest[mod[rest] >= cfg.asymptotic_radius]
            if far.size:
                vals, ok = _ml_asymptotic(alpha, beta, flat[far], cfg)
                out[far[ok]] = vals[ok]
                if np.any(~ok):
                    logger.debug(f"{np.count_nonzero(~ok)} asymptotic points routed to inversion")
                pending = np.concatenate([rest[mod[rest] < cfg.asymptotic_radius], far[~ok]])
        if pending.size:
            out[pending] = _ml_laplace(alpha, beta, flat[pending], cfg)

    result = out.real if real_input else out
    result = result.reshape(z_arr.shape)
    if result.ndim == 0:
        return float(result) if real_input else complex(result)
    return result


def ml(z, alpha: float, beta: float = 1.0):
    """Shorthand for mittag_leffler(MLParams(alpha, beta), z)."""
    return mittag_leffler(MLParams(alpha, beta), z)


def mittag_leffler_mp(alpha: float, beta: float, z: Number, dps: Optional[int] = None,
                      min_terms: int = 200) -> complex:
    """
    Extended-precision Taylor summation of E_{alpha,beta}(z).

    Working precision grows with |z|^{1/alpha} so that the cancellation of
    the alternating terms does not eat the result.
    """
    MLParams(alpha, beta).validate()
    size = abs(z) ** (1.0 / alpha)
    if dps is None:
        dps = 20 + int(math.ceil(size / math.log(10.0)))
    k_min = max(min_terms, int(math.ceil(size / alpha)) + 1)
    ctx = precision_context(dps)
    zz = ctx.mpc(z)
    a, b = ctx.mpf(alpha), ctx.mpf(beta)
    total = ctx.mpc(0)
    power = ctx.mpc(1)
    eps = ctx.mpf(10) ** (-dps)
    k = 0
    while True:
        term = power * ctx.rgamma(a * k + b)
        total += term
        k += 1
        if k > k_min and abs(term) <= eps * max(abs(total), eps):
            break
        if k > 200000:
            raise SeriesDivergenceError(f"extended-precision series did not settle at z={z}")
        power *= zz
    return complex(total)


def ml_laplace_integral(alpha: float, beta: float, omega: float, lam: float,
                        cfg: Optional[QuadratureConfig] = None) -> Tuple[float, float]:
    """
    Integral over (0, inf) of e^{-lam t} t^{beta-1} E_{alpha,beta}(omega t^alpha).

    Args:
        omega: real coefficient; omega > 0 needs lam^alpha > omega
        lam: Laplace variable, > 0

    Returns:
        (quadrature value, closed form lam^{alpha-beta} / (lam^alpha - omega))
    """
    MLParams(alpha, beta).validate()
    if not 0 < alpha <= 2:
        raise ParameterError(f"alpha must lie in (0, 2], got {alpha}")
    if not lam > 0:
        raise ParameterError(f"Laplace variable must be positive, got {lam}")
    if omega > 0 and not lam ** alpha > omega:
        raise ParameterError(f"need lam^alpha > omega, got lam={lam}, omega={omega}, alpha={alpha}")
    cfg = cfg or QuadratureConfig.from_env()
    rate = lam - max(omega, 0.0) ** (1.0 / alpha)

    def integrand(t):
        return math.exp(-lam * t) * t ** (beta - 1.0) * ml(omega * t ** alpha, alpha, beta)

    value, _ = integrate_log(integrand, cfg, upper=60.0 / rate, centre=-math.log(rate))
    return value, lam ** (alpha - beta) / (lam ** alpha - omega)


def wright_phi_integral(gamma: float, t: float, s: float, theta: Optional[float] = None,
                        cfg: Optional[QuadratureConfig] = None) -> float:
    """
    phi_gamma(t, s) from its real-integral representation.

    Integrates e^{lambda t} lambda^{gamma-1} e^{-s lambda^gamma} along the
    ray lambda = rho e^{i(pi - theta)} and takes (1/pi) Im.

    Args:
        theta: ray angle from the negative axis, in
            (max(0, pi - pi/(2 gamma)), pi/2); defaults to the midpoint
    """
    if not 0 < gamma < 1:
        raise ParameterError(f"gamma must lie in (0, 1), got {gamma}")
    if not (t > 0 and s >= 0):
        raise DomainError(f"need t > 0 and s >= 0, got t={t}, s={s}")
    lo, hi = max(0.0, math.pi - math.pi / (2.0 * gamma)), math.pi / 2.0
    if theta is None:
        theta = 0.5 * (lo + hi)
    if not lo < theta < hi:
        raise ParameterError(f"theta={theta} outside ({lo}, {hi}) for gamma={gamma}")
    cfg = cfg or QuadratureConfig.from_env()
    psi = math.pi - theta
    rot = np.exp(1j * psi)
    rot_g = np.exp(1j * gamma * psi)

    def integrand(rho):
        lam = rho * rot
        return np.exp(lam * t - s * rho ** gamma * rot_g + (gamma - 1.0) * (np.log(rho) + 1j * psi)) * rot

    return ray_integral(integrand, cfg).imag / math.pi


def wright_psi_integral(gamma: float, x: float, cfg: Optional[QuadratureConfig] = None) -> float:
    """Psi_gamma(x) = phi_gamma(1, x) for real x >= 0."""
    return wright_phi_integral(gamma, 1.0, x, cfg=cfg)


def _wright_plan(gamma: float, r: float, max_terms: int) -> Optional[Tuple[int, int]]:
    """Number of terms and decimal precision for the Wright series at |z| = r."""
    if r == 0.0:
        return 1, 30
    log_r = math.log(r)
    peak = -math.inf
    n_peak = 0
    for n in range(max_terms + 1):
        x = 1.0 - gamma - gamma * n
        if x > 0:
            log_rg = -math.lgamma(x)
        else:
            log_rg = math.lgamma(1.0 - x) - math.log(math.pi)
        bound = n * log_r - math.lgamma(n + 1.0) + log_rg
        if bound > peak:
            peak, n_peak = bound, n
        elif n > n_peak + 2 and bound < min(peak, 0.0) - 60.0:
            dps = max(30, int(peak / math.log(10.0)) + 40)
            return n + 1, dps
    return None


def wright_psi(gamma: float, z: Number, cfg: Optional[WrightConfig] = None) -> Number:
    """
    Wright-type function Psi_gamma(z) = sum (-z)^n / (n! Gamma(1 - gamma - gamma n)).

    The alternating series is summed in extended precision sized from its
    peak term; 1/Gamma at the poles is exactly zero. When the series needs
    more than ``max_terms`` terms on the non-negative real axis, the
    real-integral representation takes over.

    Raises:
        ParameterError: gamma outside (0, 1)
        WrightTruncationError: |z| beyond the configured radius
    """
    if not 0 < gamma < 1:
        raise ParameterError(f"Wright gamma must lie in (0, 1), got {gamma}")
    cfg = cfg or default_wright_config()
    zc = complex(z)
    real_input = not isinstance(z, complex) and not np.iscomplexobj(z)
    if abs(zc) > cfg.radius:
        raise WrightTruncationError(f"|z|={abs(zc):.4g} exceeds Wright series radius {cfg.radius}")
    if gamma == 0.5:
        value = np.exp(-zc * zc / 4.0) / math.sqrt(math.pi)
        return float(value.real) if real_input else complex(value)

    plan = _wright_plan(gamma, abs(zc), cfg.max_terms)
    if plan is None:
        if zc.imag == 0.0 and zc.real >= 0.0:
            logger.warning(f"Wright series for gamma={gamma} at z={zc.real:.4g} needs more than "
                           f"{cfg.max_terms} terms; using the integral representation")
            value = wright_psi_integral(gamma, zc.real)
            return value if real_input else complex(value)
        raise WrightTruncationError(
            f"Wright series for gamma={gamma} at z={zc} needs more than {cfg.max_terms} terms")

    n_terms, dps = plan
    ctx = precision_context(dps)
    g = ctx.mpf(gamma)
    mz = -ctx.mpc(zc)
    total = ctx.mpc(0)
    power = ctx.mpc(1)
    fact = ctx.mpf(1)
    for n in range(n_terms):
        if n > 0:
            power *= mz
            fact *= n
        total += power / fact * ctx.rgamma(1 - g - g * n)
    value = complex(total)
    return value.real if real_input else value


def g_kernel(beta: float, t):
    """
    g_beta(t) = t^{beta-1} / Gamma(beta).

    Raises:
        SymbolicDeltaError: beta == 0 (the delta is the convolution identity)
        DomainError: any t <= 0
    """
    if beta == 0:
        raise SymbolicDeltaError("g_0 is the Dirac delta; handle it symbolically")
    if not beta > 0:
        raise ParameterError(f"g_beta needs beta >= 0, got {beta}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise DomainError("g_beta is evaluated for t > 0 only")
    value = t_arr ** (beta - 1.0) * special.rgamma(beta)
    return float(value) if value.ndim == 0 else value


def g_convolve(beta: float, f: Callable[[float], np.ndarray], t: float,
               cfg: Optional[QuadratureConfig] = None) -> np.ndarray:
    """
    (g_beta * f)(t) for a vector-valued f.

    Uses tau = t(1 - u^{1/beta}), which turns the kernel into the constant
    t^beta / Gamma(beta + 1) on u in [0, 1]. g_0 * f = f.
    """
    if beta == 0:
        return np.asarray(f(t))
    if not beta > 0:
        raise ParameterError(f"g_beta needs beta >= 0, got {beta}")
    if t < 0:
        raise DomainError(f"convolution time must be >= 0, got {t}")
    if t == 0:
        return np.zeros_like(np.asarray(f(0.0)), dtype=float)
    cfg = cfg or QuadratureConfig.from_env()
    value, _ = quad_vec_complex(lambda u: f(t * (1.0 - u ** (1.0 / beta))), 0.0, 1.0, cfg)
    scale = t ** beta * special.rgamma(beta + 1.0)
    value = value * scale
    return value.real if np.allclose(value.imag, 0.0, atol=1e-300) else value


def l1_weights(n: int, alpha: float) -> np.ndarray:
    """b_j = (j+1)^{1-alpha} - j^{1-alpha}, j = 0..n-1."""
    j = np.arange(n, dtype=float)
    return (j + 1.0) ** (1.0 - alpha) - j ** (1.0 - alpha)


def caputo_l1(samples: Trajectory, alpha: float) -> Trajectory:
    """
    L1 approximation of the Caputo derivative D_t^alpha on a uniform grid.

    Args:
        samples: values on a uniform grid starting at t = 0
        alpha: order in (0, 1]; alpha = 1 gives backward differences

    Returns:
        Trajectory of D_t^alpha u on grid[1:]
    """
    if not 0 < alpha <= 1:
        raise ParameterError(f"caputo_l1 needs alpha in (0, 1], got {alpha}")
    if samples.grid.size < 2 or samples.grid[0] != 0.0:
        raise GridError("caputo_l1 needs at least two nodes and a grid starting at t = 0")
    h = samples.step()
    du = np.diff(samples.states, axis=0)
    n = du.shape[0]
    b = l1_weights(n, alpha)
    scale = h ** (-alpha) / special.gamma(2.0 - alpha)
    out = np.empty_like(du)
    for c in range(du.shape[1]):
        out[:, c] = np.convolve(b, du[:, c])[:n]
    return Trajectory(samples.grid[1:], scale * out)
