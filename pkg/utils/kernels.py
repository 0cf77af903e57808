"""
Subordination kernels: the Wright-type density phi_gamma, the one-sided
stable density p_alpha, the general kernel f_{alpha,gamma}^beta given by a
contour integral, and the half-power kernel, plus mass and Laplace
validators.

Every kernel is a probability density in s for fixed t. The Laplace
characterizations below are the ground truth the real-integral routes are
checked against.
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import special

from utils.errors import DomainError, ParameterError, QuadratureError, WrightTruncationError
from utils.quadrature import (
    QuadratureConfig, fourier_cos_integral, integrate_log, ray_integral, worker_count,
)
from utils.specfun import default_wright_config, ml, wright_phi_integral, wright_psi, wright_psi_integral

logger = logging.getLogger(__name__)

FAMILIES = ("phi", "p", "f", "half")
YOSIDA_VARIANTS = ("corrected", "printed")

ROUTES = {
    "phi": ("wright", "integral"),
    "p": ("wright", "yosida"),
    "f": ("contour", "semigroup"),
    "half": ("closed",),
}

KERNEL_COLUMNS = ["family", "alpha", "beta", "gamma", "t", "s", "value"]


def phi_theta_range(gamma: float) -> Tuple[float, float]:
    return max(0.0, math.pi - math.pi / (2.0 * gamma)), math.pi / 2.0


def p_theta_range(alpha: float) -> Tuple[float, float]:
    return math.pi / 2.0, min(math.pi, math.pi / (2.0 * alpha))


def default_p_theta(alpha: float) -> float:
    """3 pi/4 while that keeps alpha*theta <= pi/2, otherwise the midpoint."""
    if alpha <= 2.0 / 3.0:
        return 0.75 * math.pi
    lo, hi = p_theta_range(alpha)
    return 0.5 * (lo + hi)


def f_omega_range(alpha: float, beta: float, gamma: float) -> Tuple[float, float]:
    """Admissible half-angles of the contour for f_{alpha,gamma}^beta."""
    return math.pi - alpha * math.pi / 2.0, min(math.pi, (math.pi - gamma * math.pi / 2.0) / beta)


@dataclass
class KernelSpec:
    """
    Identifies one subordination kernel.

    phi reads ``gamma``; p and half read ``alpha``; f reads all three
    orders plus the contour half-angle ``omega``. ``theta`` is the ray
    angle of the real-integral routes. Unset angles take the midpoint
    defaults.
    """
    family: str
    alpha: float = 1.0
    gamma: float = 1.0
    beta: float = 1.0
    omega: Optional[float] = None
    theta: Optional[float] = None
    route: Optional[str] = None
    yosida_variant: str = "corrected"

    def validate(self) -> None:
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown kernel family {self.family!r}; choose from {FAMILIES}")
        if self.route is not None and self.route not in ROUTES[self.family]:
            raise ParameterError(
                f"route {self.route!r} is not available for {self.family}; use {ROUTES[self.family]}")
        if self.yosida_variant not in YOSIDA_VARIANTS:
            raise ParameterError(f"unknown Yosida variant {self.yosida_variant!r}")
        if self.family == "phi":
            _check_phi(self.gamma, self.theta)
        elif self.family == "p":
            _check_p(self.alpha, self.theta)
        elif self.family == "half":
            if not 0 < self.alpha <= 2:
                raise ParameterError(f"half-power kernel needs alpha in (0, 2], got {self.alpha}")
        else:
            self._check_f()

    def _check_f(self) -> None:
        a, b, g = self.alpha, self.beta, self.gamma
        if not 0 < a <= 2:
            raise ParameterError(f"f kernel needs alpha in (0, 2], got {a}")
        if not 0 < g < 2:
            raise ParameterError(f"f kernel needs gamma in (0, 2), got {g}")
        if not b > 0 or (a < 2 and not b < (2.0 - g) / (2.0 - a)):
            raise ParameterError(f"beta={b} outside (0, (2 - gamma)/(2 - alpha)) for alpha={a}, gamma={g}")
        if b == 1.0 and g == a:
            raise ParameterError("beta = 1 with gamma = alpha is the identity subordination; no density")
        lo, hi = f_omega_range(a, b, g)
        if not lo < hi:
            raise ParameterError(f"empty contour-angle interval ({lo:.4f}, {hi:.4f})")
        if self.omega is not None and not lo < self.omega < hi:
            raise ParameterError(f"omega={self.omega} outside ({lo:.4f}, {hi:.4f})")
        if self.route == "semigroup" and g != 1.0:
            raise ParameterError("the semigroup real form needs gamma = 1")

    @property
    def contour_angle(self) -> float:
        if self.omega is not None:
            return self.omega
        lo, hi = f_omega_range(self.alpha, self.beta, self.gamma)
        return 0.5 * (lo + hi)

    def scale(self, t: float) -> float:
        """Characteristic s-scale of the kernel at time t."""
        if self.family == "phi":
            return t ** self.gamma
        if self.family == "p":
            return t ** (1.0 / self.alpha)
        if self.family == "half":
            return t
        return t ** (self.gamma / (self.alpha * self.beta))


def _check_phi(gamma: float, theta: Optional[float]) -> None:
    if not 0 < gamma < 1:
        raise ParameterError(f"phi kernel needs gamma in (0, 1), got {gamma}")
    if theta is not None:
        lo, hi = phi_theta_range(gamma)
        if not lo < theta < hi:
            raise ParameterError(f"theta={theta} outside ({lo:.4f}, {hi:.4f}) for gamma={gamma}")


def _check_p(alpha: float, theta: Optional[float]) -> None:
    if not 0 < alpha < 1:
        raise ParameterError(f"p kernel needs alpha in (0, 1), got {alpha}")
    if theta is not None:
        lo, hi = p_theta_range(alpha)
        if not lo < theta < hi:
            raise ParameterError(f"theta={theta} outside ({lo:.4f}, {hi:.4f}) for alpha={alpha}")


def _check_point(t: float, s: float) -> None:
    if not (t > 0 and s > 0):
        raise DomainError(f"kernels are evaluated at t > 0, s > 0; got t={t}, s={s}")


def phi_kernel(gamma: float, t: float, s: float, route: str = "wright",
               theta: Optional[float] = None, cfg: Optional[QuadratureConfig] = None) -> float:
    """
    phi_gamma(t, s) = t^{-gamma} Psi_gamma(s t^{-gamma}).

    Args:
        route: "wright" (series, integral beyond the series radius) or
            "integral" (ray integral at angle theta)
    """
    _check_phi(gamma, theta)
    _check_point(t, s)
    if route == "integral":
        return wright_phi_integral(gamma, t, s, theta, cfg)
    if route != "wright":
        raise ParameterError(f"unknown phi route {route!r}")
    if gamma == 0.5:
        return math.exp(-s * s / (4.0 * t)) / math.sqrt(math.pi * t)
    scale = t ** (-gamma)
    x = s * scale
    if x <= default_wright_config().radius:
        try:
            return scale * wright_psi(gamma, x)
        except WrightTruncationError:
            pass
    return scale * _psi_beyond_series(gamma, x, cfg)


def _psi_beyond_series(gamma: float, x: float, cfg: Optional[QuadratureConfig]) -> float:
    """Psi_gamma(x) past the series radius: 0 once the e^{-B x^{1/(1-gamma)}} decay underflows."""
    log_b = math.log(1.0 - gamma) + gamma / (1.0 - gamma) * math.log(gamma)
    if log_b + math.log(x) / (1.0 - gamma) > math.log(745.0):
        return 0.0
    return wright_psi_integral(gamma, x, cfg)


def _yosida(alpha: float, t: float, s: float, theta: float, variant: str,
            cfg: Optional[QuadratureConfig]) -> float:
    cfg = cfg or QuadratureConfig.from_env()
    c, sn = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(alpha * theta), math.sin(alpha * theta)

    def integrand(rho):
        r_a = rho ** alpha
        modulus = s * rho * c - t * r_a * ca
        if variant == "printed":
            phase = s * rho * sn - t * rho * sa + theta
        else:
            phase = s * rho * sn - t * r_a * sa + theta
        return np.exp(modulus + 1j * phase)

    return ray_integral(integrand, cfg).imag / math.pi


def p_kernel(alpha: float, t: float, s: float, route: str = "wright",
             variant: str = "corrected", theta: Optional[float] = None,
             cfg: Optional[QuadratureConfig] = None) -> float:
    """
    One-sided stable density: integral of e^{-lambda s} p_alpha(t, s) ds = e^{-lambda^alpha t}.

    The Wright route uses p = alpha t s^{-alpha-1} Psi_alpha(t s^{-alpha});
    the Yosida route integrates along arg = theta. ``variant="printed"``
    reproduces the published phase term t rho sin(alpha theta).
    """
    _check_p(alpha, theta)
    _check_point(t, s)
    if route == "yosida":
        if variant not in YOSIDA_VARIANTS:
            raise ParameterError(f"unknown Yosida variant {variant!r}")
        return _yosida(alpha, t, s, default_p_theta(alpha) if theta is None else theta, variant, cfg)
    if route != "wright":
        raise ParameterError(f"unknown p route {route!r}")
    if alpha == 0.5:
        return t * math.exp(-t * t / (4.0 * s)) / (2.0 * math.sqrt(math.pi) * s ** 1.5)
    x = t * s ** (-alpha)
    lead = alpha * t * s ** (-alpha - 1.0)
    if x <= default_wright_config().radius:
        try:
            return lead * wright_psi(alpha, x)
        except WrightTruncationError:
            pass
    return lead * _psi_beyond_series(alpha, x, cfg)


def f_kernel(spec: KernelSpec, t: float, s: float,
             cfg: Optional[QuadratureConfig] = None) -> float:
    """
    f_{alpha,gamma}^beta(t, s) by quadrature over the boundary of the sector of half-angle omega.

    On the rays -rho e^{+-i omega} the branch (-rho e^{+-i omega})^{1/alpha}
    = rho^{1/alpha} e^{-+i(pi - omega)/alpha}; the two rays are conjugate,
    so the kernel is (1/pi) Im of one ray integral. E_gamma decays
    algebraically there because beta omega < pi - gamma pi/2.
    """
    spec.validate()
    if spec.family != "f":
        raise ParameterError(f"f_kernel needs an f spec, got {spec.family!r}")
    _check_point(t, s)
    cfg = cfg or QuadratureConfig.from_env()
    if spec.route == "semigroup":
        return f_kernel_semigroup(spec.alpha, spec.beta, t, s, spec.omega, cfg)
    a, b, g = spec.alpha, spec.beta, spec.gamma
    w = spec.contour_angle
    inv = 1.0 / a
    tg = t ** g
    ray = np.exp(1j * b * w)
    branch = np.exp(1j * (w - math.pi) / a)
    lead = np.exp(1j * ((w - math.pi) * (inv - 1.0) + w))

    def integrand(rho):
        return ml(-tg * rho ** b * ray, g) * rho ** (inv - 1.0) * np.exp(-s * rho ** inv * branch) * lead

    value = ray_integral(integrand, cfg).imag / math.pi
    logger.debug(f"f kernel (alpha={a}, gamma={g}, beta={b}) at t={t}, s={s}: omega={w:.4f}")
    return value


def f_kernel_semigroup(alpha: float, beta: float, t: float, s: float,
                       omega: Optional[float] = None,
                       cfg: Optional[QuadratureConfig] = None) -> float:
    """gamma = 1 real form of f, after substituting r = rho^{1/alpha}."""
    spec = KernelSpec("f", alpha=alpha, gamma=1.0, beta=beta, omega=omega)
    spec.validate()
    _check_point(t, s)
    cfg = cfg or QuadratureConfig.from_env()
    w = spec.contour_angle
    ray = np.exp(1j * beta * w)
    branch = np.exp(1j * (w - math.pi) / alpha)
    shift = 1j * ((w - math.pi) * (1.0 / alpha - 1.0) + w)

    def integrand(r):
        return np.exp(-t * r ** (alpha * beta) * ray - s * r * branch + shift)

    return alpha * ray_integral(integrand, cfg).imag / math.pi


def half_power_kernel(alpha: float, t: float, s: float) -> float:
    """(alpha/pi) t^{alpha/2} s^{alpha/2 - 1} / (s^alpha + t^alpha)."""
    if not 0 < alpha <= 2:
        raise ParameterError(f"half-power kernel needs alpha in (0, 2], got {alpha}")
    _check_point(t, s)
    return (alpha / math.pi) * t ** (alpha / 2.0) * s ** (alpha / 2.0 - 1.0) / (s ** alpha + t ** alpha)


def kernel_value(spec: KernelSpec, t: float, s: float,
                 cfg: Optional[QuadratureConfig] = None) -> float:
    """Evaluate any kernel family at (t, s)."""
    spec.validate()
    if spec.family == "phi":
        return phi_kernel(spec.gamma, t, s, spec.route or "wright", spec.theta, cfg)
    if spec.family == "p":
        return p_kernel(spec.alpha, t, s, spec.route or "wright", spec.yosida_variant, spec.theta, cfg)
    if spec.family == "half":
        return half_power_kernel(spec.alpha, t, s)
    return f_kernel(spec, t, s, cfg)


def kernel_tail_mass(spec: KernelSpec, t: float, S: float) -> Optional[float]:
    """
    Mass of the kernel beyond s = S, or an upper bound for it.

    Returns None for f, which has no closed-form tail.
    """
    if spec.family == "half":
        return (2.0 / math.pi) * math.atan((t / S) ** (spec.alpha / 2.0))
    if spec.family == "p":
        return t * S ** (-spec.alpha) * special.rgamma(1.0 - spec.alpha)
    if spec.family == "phi":
        # Markov bound with the eighth moment 8! t^{8 gamma} / Gamma(1 + 8 gamma)
        g = spec.gamma
        return math.exp(math.lgamma(9.0) + 8.0 * g * math.log(t) - math.lgamma(1.0 + 8.0 * g)
                        - 8.0 * math.log(S))
    return None


def _integrate_kernel(spec: KernelSpec, t: float, weight: Callable[[float], float],
                      cfg: QuadratureConfig) -> float:
    centre = math.log(spec.scale(t))
    value, _ = integrate_log(lambda s: kernel_value(spec, t, s, cfg) * weight(s), cfg,
                             centre=centre)
    return value


def kernel_mass(spec: KernelSpec, t: float, cfg: Optional[QuadratureConfig] = None) -> float:
    """Integral of the kernel over s in (0, inf)."""
    spec.validate()
    if not t > 0:
        raise DomainError(f"kernel mass needs t > 0, got {t}")
    cfg = cfg or QuadratureConfig.from_env()
    mass = _integrate_kernel(spec, t, lambda s: 1.0, cfg)
    if spec.family in ("p", "half"):
        mass += kernel_tail_mass(spec, t, cfg.truncation)
    return mass


def _test_function(spec: KernelSpec, lam: float) -> Callable[[float], float]:
    if spec.family in ("phi", "p") or spec.alpha == 1.0:
        return lambda s: math.exp(-lam * s)
    return lambda s: ml(-lam * s ** spec.alpha, spec.alpha)


def laplace_target(spec: KernelSpec, t: float, lam: float) -> float:
    """Closed-form value of the kernel's Laplace characterization at lam."""
    if spec.family == "phi":
        return ml(-lam * t ** spec.gamma, spec.gamma)
    if spec.family == "p":
        return math.exp(-(lam ** spec.alpha) * t)
    if spec.family == "f":
        return ml(-(lam ** spec.beta) * t ** spec.gamma, spec.gamma)
    return ml(-math.sqrt(lam) * t ** (spec.alpha / 2.0), spec.alpha / 2.0)


def kernel_laplace_check(spec: KernelSpec, t: float, lambdas: Sequence[float],
                         cfg: Optional[QuadratureConfig] = None) -> List[float]:
    """
    Residuals |integral of T_lambda(s) k(t, s) ds - target(lambda)| per lambda.

    phi and p are tested against e^{-lambda s}; f and half against
    E_alpha(-lambda s^alpha), which for alpha = 2 is cos(sqrt(lambda) s)
    and goes through the Fourier-integral route. lambda = 0 checks the mass.
    """
    spec.validate()
    if not t > 0:
        raise DomainError(f"Laplace check needs t > 0, got {t}")
    cfg = cfg or QuadratureConfig.from_env()
    residuals = []
    for lam in lambdas:
        if lam < 0:
            raise ParameterError(f"Laplace variable must be >= 0, got {lam}")
        if lam == 0:
            residuals.append(abs(kernel_mass(spec, t, cfg) - 1.0))
            continue
        if spec.family in ("f", "half") and spec.alpha == 2.0:
            value, _ = fourier_cos_integral(lambda s: kernel_value(spec, t, s, cfg) if s > 0 else 0.0,
                                            math.sqrt(lam), cfg)
        else:
            value = _integrate_kernel(spec, t, _test_function(spec, lam), cfg)
        target = laplace_target(spec, t, lam)
        residuals.append(abs(value - target))
        logger.debug(f"{spec.family} Laplace check at lambda={lam}: {value:.12g} vs {target:.12g}")
    return residuals


def validate_yosida_variant(alpha: float, t: float = 1.0, cfg: Optional[QuadratureConfig] = None,
                            lambdas: Sequence[float] = (0.5, 1.0, 2.0), tol: float = 1e-6) -> str:
    """
    Decide which Yosida real-integral variant reproduces e^{-lambda^alpha t}.

    The printed variant is tried first; when it fails the discrepancy is
    logged and the corrected variant is checked.

    Raises:
        QuadratureError: neither variant passes
    """
    cfg = cfg or QuadratureConfig.from_env()
    worst = {}
    for variant in ("printed", "corrected"):
        spec = KernelSpec("p", alpha=alpha, route="yosida", yosida_variant=variant)
        try:
            worst[variant] = max(kernel_laplace_check(spec, t, lambdas, cfg))
        except QuadratureError as e:
            logger.warning(f"Yosida {variant} variant did not integrate: {e}")
            worst[variant] = math.inf
        if worst[variant] <= tol:
            logger.info(f"Yosida {variant} variant passes the Laplace check "
                        f"(max residual {worst[variant]:.3e})")
            return variant
        logger.warning(f"Yosida {variant} variant fails the Laplace check for alpha={alpha}: "
                       f"max residual {worst[variant]:.3e} > {tol:.1e}")
    raise QuadratureError(f"no Yosida variant reproduces e^(-lambda^alpha t): {worst}")


def kernel_table(spec: KernelSpec, t_values: Sequence[float], s_values: Sequence[float],
                 cfg: Optional[QuadratureConfig] = None) -> pd.DataFrame:
    """Kernel values on a (t, s) grid, one row per point, t-major order."""
    spec.validate()
    cfg = cfg or QuadratureConfig.from_env()
    points = [(float(t), float(s)) for t in t_values for s in s_values]
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        values = list(pool.map(lambda ts: kernel_value(spec, ts[0], ts[1], cfg), points))
    rows = [{
        'family': spec.family,
        'alpha': spec.alpha,
        'beta': spec.beta,
        'gamma': spec.gamma,
        't': t,
        's': s,
        'value': v,
    } for (t, s), v in zip(points, values)]
    logger.info(f"Kernel table for {spec.family}: {len(rows)} points")
    return pd.DataFrame(rows, columns=KERNEL_COLUMNS)
