"""
Finite-dimensional operator model: matrix operators with a cached
eigendecomposition, resolvents, sectoriality probing, fractional powers
through the keyhole Dunford integral, and the analyticity-angle arithmetic
of subordinated families.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from utils.errors import (
    ContourError, EigenvalueCollisionError, ExtrapolationError, MatrixFormatError,
    NegativeSpectrumError, ParameterError, SectorialityError, SpectralMethodError,
)
from utils.quadrature import QuadratureConfig, quad_vec_complex

logger = logging.getLogger(__name__)

SpectralCache = Tuple[np.ndarray, np.ndarray, np.ndarray]

_COND_LIMIT = 1e8
_RECONSTRUCTION_TOL = 1e-10


def _build_cache(entries: np.ndarray) -> Tuple[np.ndarray, Optional[SpectralCache]]:
    """Eigenvalues and, when trustworthy, (eigenvalues, V, V^{-1})."""
    if np.allclose(entries, entries.conj().T, rtol=0.0, atol=1e-14 * max(1.0, np.abs(entries).max())):
        w, v = linalg.eigh(entries)
        w = w.astype(complex)
        return w, (w, v.astype(complex), v.conj().T.astype(complex))
    w, v = linalg.eig(entries)
    try:
        if np.linalg.cond(v) > _COND_LIMIT:
            return w, None
        v_inv = linalg.inv(v)
    except (linalg.LinAlgError, ValueError):
        return w, None
    rebuilt = (v * w) @ v_inv
    scale = max(linalg.norm(entries, 'fro'), 1e-300)
    if linalg.norm(rebuilt - entries, 'fro') / scale > _RECONSTRUCTION_TOL:
        return w, None
    return w, (w, v, v_inv)


@dataclass
class MatrixOperator:
    """Square complex matrix standing in for a sectorial operator A."""
    entries: np.ndarray
    eigenvalues: np.ndarray = field(repr=False, default=None)
    spectral_cache: Optional[SpectralCache] = field(repr=False, default=None)

    def __post_init__(self):
        entries = np.atleast_2d(np.asarray(self.entries, dtype=complex))
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise MatrixFormatError(f"operator must be square, got shape {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise MatrixFormatError("operator entries must be finite")
        self.entries = entries
        if self.eigenvalues is None:
            self.eigenvalues, self.spectral_cache = _build_cache(entries)

    @classmethod
    def from_array(cls, a) -> 'MatrixOperator':
        return cls(np.asarray(a))

    @classmethod
    def diagonal(cls, values: Sequence[complex]) -> 'MatrixOperator':
        w = np.asarray(values, dtype=complex)
        eye = np.eye(w.size, dtype=complex)
        return cls(np.diag(w), w, (w, eye, eye.copy()))

    @classmethod
    def scalar(cls, value: complex) -> 'MatrixOperator':
        return cls.diagonal([value])

    @classmethod
    def dirichlet_laplacian(cls, n: int) -> 'MatrixOperator':
        """-Delta_h on n interior points of (0, 1), with its exact eigenpairs."""
        if n < 1:
            raise ParameterError(f"grid size must be >= 1, got {n}")
        h = 1.0 / (n + 1)
        main = np.full(n, 2.0 / h ** 2)
        off = np.full(n - 1, -1.0 / h ** 2)
        entries = np.diag(main) + np.diag(off, 1) + np.diag(off, -1)
        k = np.arange(1, n + 1)
        mu = (2.0 / h ** 2) * (1.0 - np.cos(k * np.pi * h))
        v = math.sqrt(2.0 * h) * np.sin(np.outer(k, k) * np.pi * h)
        w = mu.astype(complex)
        return cls(entries, w, (w, v.astype(complex), v.T.astype(complex)))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def diagonalizable(self) -> bool:
        return self.spectral_cache is not None

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.entries.imag == 0.0))

    def norm(self) -> float:
        return float(linalg.norm(self.entries, 2))

    def min_modulus(self) -> float:
        return float(np.abs(self.eigenvalues).min())

    def apply_function(self, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """f(A) = V diag(f(lambda)) V^{-1}."""
        if self.spectral_cache is None:
            raise SpectralMethodError("spectral route needs a diagonalizable operator")
        w, v, v_inv = self.spectral_cache
        return (v * np.asarray(f(w), dtype=complex)) @ v_inv

    def shifted(self, eps: float) -> 'MatrixOperator':
        """A + eps I, reusing the eigenvectors."""
        entries = self.entries + eps * np.eye(self.dim)
        w = self.eigenvalues + eps
        cache = None
        if self.spectral_cache is not None:
            _, v, v_inv = self.spectral_cache
            cache = (w, v, v_inv)
        return MatrixOperator(entries, w, cache)

    def __matmul__(self, x):
        return self.entries @ x


def real_if_close(m: np.ndarray, like: MatrixOperator, tol: float = 1e-12) -> np.ndarray:
    """Drop a negligible imaginary part when the operator is real."""
    if like.is_real and np.all(np.abs(m.imag) <= tol * max(1.0, np.abs(m).max())):
        return m.real
    return m


def spectral_power(A: MatrixOperator, b: float) -> np.ndarray:
    """A^b by the functional calculus (principal branch)."""
    def power(w):
        safe = np.where(w == 0, 1.0, w)
        return np.where(w == 0, 0.0, np.exp(b * np.log(safe)))
    return A.apply_function(power)


def parse_matrix(text: str) -> MatrixOperator:
    """
    Parse the matrix text format.

    Line 1 holds the dimension, then one line per row with whitespace
    separated entries written as ``re`` or ``re+imi`` / ``re-imi``. Lines
    starting with ``#`` are comments.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith('#')]
    if not lines:
        raise MatrixFormatError("matrix text is empty")
    try:
        dim = int(lines[0])
    except ValueError:
        raise MatrixFormatError(f"first line must be the dimension, got {lines[0]!r}")
    if dim < 1:
        raise MatrixFormatError(f"dimension must be positive, got {dim}")
    rows = lines[1:]
    if len(rows) != dim:
        raise MatrixFormatError(f"expected {dim} rows, found {len(rows)}")
    entries = np.empty((dim, dim), dtype=complex)
    for i, row in enumerate(rows):
        tokens = row.split()
        if len(tokens) != dim:
            raise MatrixFormatError(f"row {i + 1} has {len(tokens)} entries, expected {dim}")
        for j, token in enumerate(tokens):
            entries[i, j] = _parse_entry(token)
    return MatrixOperator(entries)


def _parse_entry(token: str) -> complex:
    try:
        if token.endswith('i'):
            return complex(token[:-1] + 'j')
        return complex(float(token))
    except ValueError:
        raise MatrixFormatError(f"cannot parse matrix entry {token!r}")


def load_matrix(path: str) -> MatrixOperator:
    """Read a matrix file; I/O failures surface as OSError."""
    with open(path, 'r') as fh:
        text = fh.read()
    logger.debug(f"Loaded matrix file {path}")
    return parse_matrix(text)


def resolvent(A: MatrixOperator, lam: complex) -> np.ndarray:
    """
    R(lambda, A) = (lambda I - A)^{-1} by pivoted LU.

    Raises:
        EigenvalueCollisionError: lambda within 1e-12 ||A|| of the spectrum
    """
    margin = 1e-12 * A.norm()
    gap = float(np.abs(A.eigenvalues - lam).min())
    if gap <= margin:
        raise EigenvalueCollisionError(f"lambda={lam} is within {gap:.3e} of the spectrum")
    shifted = lam * np.eye(A.dim) - A.entries
    lu, piv = linalg.lu_factor(shifted)
    inv = linalg.lu_solve((lu, piv), np.eye(A.dim, dtype=complex))
    residual = linalg.norm(shifted @ inv - np.eye(A.dim))
    if residual > 1e-10 * np.linalg.cond(shifted):
        logger.warning(f"resolvent residual {residual:.3e} at lambda={lam}")
    return inv


@dataclass
class SectorReport:
    """Outcome of probing an operator's sectoriality."""
    spectral_angle: float
    resolvent_sup: List[Tuple[float, float]]
    verdict_angle: float


def spectral_angle(A: MatrixOperator) -> float:
    """
    max |arg lambda| over the nonzero eigenvalues.

    Raises:
        NegativeSpectrumError: an eigenvalue lies on the negative real axis
    """
    w = A.eigenvalues
    scale = max(A.norm(), 1e-300)
    nonzero = w[np.abs(w) > 1e-14 * scale]
    if nonzero.size == 0:
        return 0.0
    angles = np.abs(np.angle(nonzero))
    if np.any(angles >= math.pi - 1e-12):
        raise NegativeSpectrumError(f"eigenvalues on the negative real axis: {nonzero[angles >= math.pi - 1e-12]}")
    return float(angles.max())


def sector_probe(A: MatrixOperator, probe_angles: Optional[Sequence[float]] = None,
                 radii: Optional[Sequence[float]] = None) -> SectorReport:
    """
    Sample sup ||z R(z, A)|| on the rays arg z = +-omega' for each probe angle.

    Args:
        probe_angles: angles strictly between the spectral angle and pi
            (default: the quarter points of that interval)
        radii: sample radii (default: 61 log-spaced points in [1e-3, 1e3])
    """
    angle = spectral_angle(A)
    if probe_angles is None:
        probe_angles = [angle + (math.pi - angle) * q for q in (0.25, 0.5, 0.75)]
    if radii is None:
        radii = np.logspace(-3, 3, 61)
    sups = []
    for omega in probe_angles:
        if not angle < omega < math.pi:
            raise ParameterError(f"probe angle {omega} must lie in ({angle}, pi)")
        sup = 0.0
        for r in radii:
            for sign in (1.0, -1.0):
                z = r * np.exp(1j * sign * omega)
                try:
                    sup = max(sup, abs(z) * linalg.norm(resolvent(A, z), 2))
                except EigenvalueCollisionError:
                    sup = math.inf
        sups.append((float(omega), float(sup)))
        logger.debug(f"sector probe at omega'={omega:.4f}: sup ||zR|| = {sup:.4g}")
    return SectorReport(spectral_angle=angle, resolvent_sup=sups, verdict_angle=angle)


def _distance_to_keyhole(points: np.ndarray, zeta: float, d: float) -> float:
    best = math.inf
    for mu in points:
        r, phi = abs(mu), np.angle(mu)
        if abs(phi) <= zeta:
            best = min(best, abs(r - d))
        else:
            best = min(best, abs(mu - d * np.exp(1j * math.copysign(zeta, phi))))
        for sign in (1.0, -1.0):
            e = np.exp(1j * sign * zeta)
            proj = max((mu * e.conjugate()).real, d)
            best = min(best, abs(mu - proj * e))
    return float(best)


def keyhole_integral(A: MatrixOperator, f: Callable[[complex], complex], zeta: float, d: float,
                     cfg: QuadratureConfig, r_max: float,
                     tail: Optional[Callable[[float], np.ndarray]] = None) -> np.ndarray:
    """
    (1/2 pi i) times the integral of f(lambda)(lambda - A)^{-1} around the spectrum.

    The path runs in along the ray arg = zeta, clockwise over the arc of
    radius d through arg 0, and out along arg = -zeta, so the spectrum is
    encircled counterclockwise. Rays are cut at r_max; ``tail(r_max)``
    supplies the remainder when given.
    """
    if not 0 < zeta < math.pi:
        raise ParameterError(f"keyhole angle must lie in (0, pi), got {zeta}")
    gap = _distance_to_keyhole(A.eigenvalues, zeta, d)
    if gap < cfg.contour_margin * max(1.0, A.norm()):
        raise ContourError(f"keyhole contour passes within {gap:.3e} of the spectrum")
    eye = np.eye(A.dim, dtype=complex)
    up, down = np.exp(1j * zeta), np.exp(-1j * zeta)

    def res(lam):
        return linalg.solve(lam * eye - A.entries, eye)

    def rays(v):
        r = d * math.exp(v)
        lo, hi = r * down, r * up
        return (f(lo) * res(lo) * lo - f(hi) * res(hi) * hi) / (2j * math.pi)

    def arc(phi):
        lam = d * np.exp(1j * phi)
        return -(f(lam) * res(lam) * lam) / (2.0 * math.pi)

    v_max = math.log(r_max / d)
    on_rays, _ = quad_vec_complex(rays, 0.0, v_max, cfg)
    on_arc, _ = quad_vec_complex(arc, -zeta, zeta, cfg)
    total = on_rays + on_arc
    if tail is not None:
        total = total + tail(r_max)
    return total


def _neumann_tail(A: MatrixOperator, b: float, zeta: float) -> Callable[[float], np.ndarray]:
    """Ray remainder beyond R of the lambda^{-b} integral, from the Neumann series."""
    def tail(R: float) -> np.ndarray:
        out = np.zeros((A.dim, A.dim), dtype=complex)
        power = np.eye(A.dim, dtype=complex)
        ratio = A.norm() / R
        for k in range(60):
            out += power * (math.sin(zeta * (b + k)) * R ** (-b - k) / (math.pi * (b + k)))
            if ratio ** (k + 1) < 1e-18:
                break
            power = power @ A.entries
        return out
    return tail


def _negative_fraction(A: MatrixOperator, b: float, angle: float, cfg: QuadratureConfig) -> np.ndarray:
    """A^{-b} for 0 < b < 1 by the Balakrishnan keyhole integral."""
    zeta = 0.5 * (angle + math.pi)
    d = 0.5 * A.min_modulus()
    r_max = 1e3 * max(A.norm(), d)
    return keyhole_integral(A, lambda lam: lam ** (-b), zeta, d, cfg, r_max,
                            tail=_neumann_tail(A, b, zeta))


def _power_invertible(A: MatrixOperator, b: float, angle: float, cfg: QuadratureConfig) -> np.ndarray:
    whole = int(math.floor(b))
    frac = b - whole
    integer_part = np.linalg.matrix_power(A.entries, whole)
    if frac == 0.0:
        return integer_part
    neg = _negative_fraction(A, frac, angle, cfg)
    lu = linalg.lu_factor(neg)
    return linalg.lu_solve(lu, integer_part)


def _richardson(values: List[np.ndarray], p: float) -> List[np.ndarray]:
    factor = 2.0 ** (-p)
    return [(values[i + 1] - factor * values[i]) / (1.0 - factor) for i in range(len(values) - 1)]


def _power_by_extrapolation(A: MatrixOperator, b: float, angle: float,
                            cfg: QuadratureConfig) -> np.ndarray:
    """A^b for 0 in sigma(A) as the eps -> 0 limit of (A + eps)^b, eps = 2^{-k}."""
    scale = max(A.norm(), 1.0)
    eps = [scale * 2.0 ** (-k) for k in range(4, 13)]
    iterates = [_power_invertible(A.shifted(e), b, angle, cfg) for e in eps]
    p, q = min(b, 1.0), max(b, 1.0)
    first = _richardson(iterates[-4:], p)
    second = _richardson(first, q) if q != p else first
    if len(second) < 2:
        return second[-1]
    last, prev = second[-1], second[-2]
    jump = linalg.norm(last - prev)
    earlier = linalg.norm(iterates[-2] - iterates[-3])
    if jump > max(earlier, 1e-6 * max(1.0, linalg.norm(last))):
        raise ExtrapolationError(f"eps-extrapolation of A^{b} diverges (step {jump:.3e})")
    logger.debug(f"eps-extrapolation of A^{b}: last correction {jump:.3e}")
    return last


def fractional_power(A: MatrixOperator, b: float,
                     cfg: Optional[QuadratureConfig] = None) -> MatrixOperator:
    """
    A^b for a sectorial matrix operator.

    With 0 in the resolvent set, A^{-b'} (b' the fractional part of b) is
    computed on the keyhole contour and A^b = (A^{-b'})^{-1} A^{floor(b)}.
    With 0 in the spectrum, (A + eps)^b is extrapolated to eps = 0.

    Raises:
        SectorialityError: b times the spectral angle is not below pi
        ContourError: keyhole too close to the spectrum
    """
    if not b > 0:
        raise ParameterError(f"power must be positive, got {b}")
    cfg = cfg or QuadratureConfig.from_env()
    angle = spectral_angle(A)
    if b * angle >= math.pi:
        raise SectorialityError(f"b * spectral angle = {b * angle:.4f} is not below pi")
    if float(b).is_integer():
        result = np.linalg.matrix_power(A.entries, int(b))
    elif A.min_modulus() <= 1e-12 * max(A.norm(), 1e-300):
        logger.info(f"0 in spectrum: extrapolating (A + eps)^{b}")
        result = _power_by_extrapolation(A, b, angle, cfg)
    else:
        result = _power_invertible(A, b, angle, cfg)
    return MatrixOperator.from_array(real_if_close(result, A, tol=1e-9))


def analyticity_angle(alpha: float, sector_angle: float) -> float:
    """theta0 = min{(pi - omega)/alpha - pi/2, pi/2} for a generator of sector angle omega."""
    return min((math.pi - sector_angle) / alpha - math.pi / 2.0, math.pi / 2.0)


@dataclass
class AnglePlan:
    """Angle arithmetic of a subordinated family S_gamma^beta."""
    alpha: float
    theta0: float
    beta: float
    gamma: float
    valid: bool
    result_angle: float
    generator_angle: float = 0.0


def angle_plan(alpha: float, theta0: float, beta: float, gamma: float) -> AnglePlan:
    """
    Analyticity angle of the gamma-family generated by -A^beta, given that
    -A generates a bounded analytic alpha-family of angle theta0.

    A is sectorial of angle pi - (pi/2 + theta0) alpha, A^beta of beta times
    that, and the resulting angle is analyticity_angle(gamma, .) capped at
    pi/2. The plan is valid when that angle is positive.
    """
    if not 0 < alpha <= 2:
        raise ParameterError(f"alpha must lie in (0, 2], got {alpha}")
    if not 0 < gamma < 2:
        raise ParameterError(f"gamma must lie in (0, 2), got {gamma}")
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    theta_max = min(math.pi / 2.0, math.pi / alpha - math.pi / 2.0)
    if not -1e-12 <= theta0 <= theta_max + 1e-12:
        raise ParameterError(f"theta0 must lie in [0, {theta_max}], got {theta0}")
    generator = max(math.pi - (math.pi / 2.0 + theta0) * alpha, 0.0)
    composed = beta * generator
    raw = (math.pi - composed) / gamma - math.pi / 2.0
    valid = composed < math.pi and raw > 0
    return AnglePlan(alpha=alpha, theta0=theta0, beta=beta, gamma=gamma, valid=valid,
                     result_angle=min(math.pi / 2.0, raw), generator_angle=generator)
