"""
Fractional Cauchy problems D_t^alpha u = sign * A u + f on matrix operators:
homogeneous and mild solutions, the 1/m reduction to first-order systems,
an implicit L1 stepper and the subordinated fractional-diffusion demo.
"""

import math
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import linalg
from scipy.integrate import solve_ivp

from utils.errors import (
    DomainError, GridError, GridTooCoarseError, IntegratorError, ParameterError,
)
from utils.kernels import KernelSpec
from utils.linop import MatrixOperator, real_if_close
from utils.quadrature import QuadratureConfig, quad_vec_complex
from utils.resolvent import ResolventFamily, mittag_leffler_matrix, s_alpha_apply, truncated_expansion
from utils.specfun import caputo_l1, g_convolve, g_kernel, ml
from utils.subordinate import family_for, subordinate_apply
from utils.trajectory import Trajectory

logger = logging.getLogger(__name__)

Forcing = Union[None, np.ndarray, Callable[[float], np.ndarray]]

__all__ = [
    "CauchyProblem", "Trajectory", "solve_homogeneous", "solve_inhomogeneous_mild",
    "check_one_over_m", "inhomogeneous_one_over_m", "l1_stepper", "graded_grid",
    "fractional_diffusion_demo", "caputo_residual",
]


@dataclass
class CauchyProblem:
    """
    D_t^alpha u = sign * A u + f, u^{(k)}(0) = x_k for k < ceil(alpha).

    ``sign`` is -1 when -A generates the family and +1 for the "= Au"
    convention. ``forcing`` may be None, a constant vector, a callable of t
    or an array of samples on the grid (linearly interpolated).
    """
    A: MatrixOperator
    alpha: float
    initial_values: List[np.ndarray]
    grid: np.ndarray
    forcing: Forcing = None
    sign: int = -1

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float).ravel()
        self.initial_values = [np.asarray(x) for x in self.initial_values]

    @property
    def m(self) -> int:
        return int(math.ceil(self.alpha))

    @property
    def dim(self) -> int:
        return self.A.dim

    @property
    def generator(self) -> MatrixOperator:
        """B with D_t^alpha u = -B u + f."""
        if self.sign == -1:
            return self.A
        return MatrixOperator.from_array(-self.A.entries)

    def validate(self) -> None:
        if not 0 < self.alpha <= 2:
            raise ParameterError(f"order must lie in (0, 2], got {self.alpha}")
        if self.sign not in (-1, 1):
            raise ParameterError(f"sign must be -1 or +1, got {self.sign}")
        if len(self.initial_values) != self.m:
            raise ParameterError(
                f"order {self.alpha} needs {self.m} initial values, got {len(self.initial_values)}")
        for x in self.initial_values:
            if x.shape != (self.dim,):
                raise ParameterError(f"initial value of length {self.dim} expected, got shape {x.shape}")
        if self.grid.size < 2 or self.grid[0] != 0.0:
            raise GridError("grid needs at least two points and must start at t = 0")
        if np.any(np.diff(self.grid) <= 0):
            raise GridError("grid must be strictly increasing")
        if isinstance(self.forcing, np.ndarray):
            if self.forcing.shape not in ((self.dim,), (self.grid.size, self.dim)):
                raise ParameterError(
                    f"forcing must be a vector of length {self.dim} or samples of shape "
                    f"({self.grid.size}, {self.dim}), got {self.forcing.shape}")

    @property
    def constant_forcing(self) -> Optional[np.ndarray]:
        if isinstance(self.forcing, np.ndarray) and self.forcing.ndim == 1:
            return self.forcing
        return None

    def forcing_at(self, t: float) -> np.ndarray:
        f = self.forcing
        if f is None:
            return np.zeros(self.dim)
        if isinstance(f, np.ndarray):
            if f.ndim == 1:
                return f
            return np.array([np.interp(t, self.grid, f[:, i]) for i in range(self.dim)])
        return np.asarray(f(t))


def _ml_apply(B: MatrixOperator, alpha: float, beta: float, t: float, y: np.ndarray) -> np.ndarray:
    """E_{alpha,beta}(-t^alpha B) y."""
    if B.diagonalizable:
        w, v, v_inv = B.spectral_cache
        return v @ (ml(-(t ** alpha) * w, alpha, beta) * (v_inv @ y))
    return mittag_leffler_matrix(B, alpha, beta, t, method="series") @ y


def _realify(states: np.ndarray, B: MatrixOperator, *inputs) -> np.ndarray:
    if B.is_real and all(np.isrealobj(x) for x in inputs if x is not None):
        return real_if_close(states, B, tol=1e-10)
    return states


def _homogeneous_term(B: MatrixOperator, alpha: float, k: int, t: float, x: np.ndarray,
                      cfg: QuadratureConfig) -> np.ndarray:
    """(g_k * S_alpha)(t) x = t^k E_{alpha,k+1}(-t^alpha B) x."""
    if t == 0.0:
        return x.astype(complex) if k == 0 else np.zeros(x.shape, dtype=complex)
    if B.diagonalizable:
        return (t ** k) * _ml_apply(B, alpha, k + 1.0, t, x)
    F = family_for(B, alpha)
    if k == 0:
        return np.asarray(s_alpha_apply(F, t, x, cfg), dtype=complex)
    return np.asarray(g_convolve(k, lambda s: s_alpha_apply(F, s, x, cfg), t, cfg), dtype=complex)


def solve_homogeneous(p: CauchyProblem, cfg: Optional[QuadratureConfig] = None) -> Trajectory:
    """
    u(t) = sum_k (g_k * S_alpha)(t) x_k on the problem grid.

    For alpha <= 1 on a uniform grid the L1 Caputo residual is attached.
    """
    p.validate()
    cfg = cfg or QuadratureConfig.from_env()
    B = p.generator
    states = np.zeros((p.grid.size, p.dim), dtype=complex)
    for j, t in enumerate(p.grid):
        for k, x in enumerate(p.initial_values):
            states[j] += _homogeneous_term(B, p.alpha, k, float(t), x, cfg)
    traj = Trajectory(p.grid, _realify(states, B, *p.initial_values))
    if p.alpha <= 1 and p.forcing is None:
        try:
            traj.residual_caputo = caputo_residual(traj, p)
        except GridError:
            logger.debug("non-uniform grid: Caputo residual not attached")
    return traj


def _memoized(c: Callable[[float], np.ndarray]) -> Callable[[float], np.ndarray]:
    cache: Dict[float, np.ndarray] = {}

    def wrapped(t: float) -> np.ndarray:
        key = round(t, 15)
        if key not in cache:
            cache[key] = c(t)
        return cache[key]
    return wrapped


def _richardson_derivative(c: Callable[[float], np.ndarray], t: float, delta: float,
                           backward: bool, tol: float) -> np.ndarray:
    if backward:
        def D(d):
            return (3.0 * c(t) - 4.0 * c(t - d) + c(t - 2.0 * d)) / (2.0 * d)
    else:
        def D(d):
            return (c(t + d) - c(t - d)) / (2.0 * d)
    coarse, fine = D(delta), D(0.5 * delta)
    value = (4.0 * fine - coarse) / 3.0
    estimate = float(np.linalg.norm(value - fine))
    if estimate > tol * max(1.0, float(np.linalg.norm(value))):
        raise GridTooCoarseError(
            f"derivative error estimate {estimate:.3e} at t={t} exceeds {tol:.1e}; refine the grid")
    return value


def solve_inhomogeneous_mild(p: CauchyProblem, cfg: Optional[QuadratureConfig] = None,
                             diff_tol: float = 1e-3) -> Trajectory:
    """
    Homogeneous part plus d/dt (g_alpha * S_alpha * f)(t).

    A constant forcing c contributes t^alpha E_{alpha,alpha+1}(-t^alpha B) c.
    Otherwise the derivative is the convolution with tau^{alpha-1}
    E_{alpha,alpha}(-tau^alpha B) for alpha >= 1, and Richardson-extrapolated
    central differences (backward at the last node) of the convolution with
    tau^alpha E_{alpha,alpha+1}(-tau^alpha B) for alpha < 1.

    Raises:
        GridTooCoarseError: the difference error estimate exceeds diff_tol
    """
    p.validate()
    cfg = cfg or QuadratureConfig.from_env()
    hom = solve_homogeneous(p, cfg)
    if p.forcing is None:
        return hom
    B, alpha = p.generator, p.alpha
    states = hom.states.astype(complex)
    c = p.constant_forcing
    if c is not None:
        for j, t in enumerate(p.grid[1:], start=1):
            states[j] += (t ** alpha) * _ml_apply(B, alpha, alpha + 1.0, t, c)
        return Trajectory(p.grid, _realify(states, B, c, *p.initial_values))

    if alpha >= 1:
        for j, t in enumerate(p.grid[1:], start=1):
            value, _ = quad_vec_complex(
                lambda tau: (tau ** (alpha - 1.0)) * _ml_apply(B, alpha, alpha, tau, p.forcing_at(t - tau)),
                0.0, float(t), cfg)
            states[j] += value
    else:
        def convolution(t: float) -> np.ndarray:
            if t <= 0:
                return np.zeros(p.dim, dtype=complex)
            value, _ = quad_vec_complex(
                lambda tau: (tau ** alpha) * _ml_apply(B, alpha, alpha + 1.0, tau, p.forcing_at(t - tau)),
                0.0, t, cfg)
            return value

        conv = _memoized(convolution)
        steps = np.diff(p.grid)
        for j, t in enumerate(p.grid[1:], start=1):
            last = j == p.grid.size - 1
            h = steps[j - 1] if last else min(steps[j - 1], steps[j])
            delta = min(h, 0.25 * t)
            states[j] += _richardson_derivative(conv, float(t), delta, last, diff_tol)
    samples = p.forcing if isinstance(p.forcing, np.ndarray) else None
    return Trajectory(p.grid, _realify(states, B, samples, *p.initial_values))


def _one_over_m(p: CauchyProblem) -> int:
    m = int(round(1.0 / p.alpha))
    if m not in (2, 3, 4) or not math.isclose(p.alpha * m, 1.0, rel_tol=1e-12):
        raise ParameterError(f"order must be 1/m with m in {{2, 3, 4}}, got {p.alpha}")
    return m


def check_one_over_m(p: CauchyProblem, cfg: Optional[QuadratureConfig] = None,
                     t0: float = 1e-4, t_min: float = 0.01) -> Tuple[Trajectory, Trajectory, float]:
    """
    Compare S_{1/m}(t)x with the first-order companion system.

    With A_hat = sign * A the companion is
    v' = A_hat^m v + sum_{k=1}^{m-1} g_{k/m}(t) A_hat^k x, integrated by
    Radau IIA from t0 with v(t0) taken from the truncated expansion of S.

    Returns:
        (u1 on the grid, u2 on grid points >= t0, max ||u1 - u2|| over t >= max(t0, t_min))
    """
    p.validate()
    m = _one_over_m(p)
    if p.forcing is not None:
        raise ParameterError("check_one_over_m handles the homogeneous problem; use inhomogeneous_one_over_m")
    cfg = cfg or QuadratureConfig.from_env()
    x = p.initial_values[0]
    is_real = p.A.is_real and np.isrealobj(x)
    a_hat = p.sign * (p.A.entries.real if is_real else p.A.entries)
    powers = [x.astype(a_hat.dtype)]
    for _ in range(m):
        powers.append(a_hat @ powers[-1])
    jac = np.linalg.matrix_power(a_hat, m)
    sources = powers[1:m]

    def rhs(t, v):
        out = jac @ v
        for k, ax in enumerate(sources, start=1):
            out = out + g_kernel(k / m, t) * ax
        return out

    u1 = solve_homogeneous(p, cfg)
    F = ResolventFamily(p.generator, p.alpha, method="series")
    v0 = truncated_expansion(F, t0, x, 60)
    v0 = v0.real if is_real else v0
    mask = p.grid >= t0
    t_eval = p.grid[mask]
    t_end = float(p.grid[-1])
    sol = solve_ivp(rhs, (t0, t_end), v0, method="Radau", t_eval=t_eval,
                    jac=jac, rtol=1e-11, atol=1e-13)
    if not sol.success:
        raise IntegratorError(f"companion system integration failed: {sol.message}")
    u2 = Trajectory(t_eval, sol.y.T)
    window = t_eval >= max(t0, t_min)
    diff = np.linalg.norm(u1.states[mask][window] - u2.states[window], axis=1)
    maxerr = float(diff.max()) if diff.size else 0.0
    logger.info(f"1/{m} companion system: max discrepancy {maxerr:.3e} on [{max(t0, t_min)}, {t_end}]")
    return u1, u2, maxerr


def inhomogeneous_one_over_m(p: CauchyProblem, cfg: Optional[QuadratureConfig] = None,
                             t_min: float = 0.05) -> Tuple[float, float]:
    """
    Residuals of the two equations solved by w = S_{1/m}x + S_{1/m} * f.

    r1 is the L1 Caputo residual of D^{1/m} w = A_hat w + g_{1-1/m} * f;
    r2 the central-difference residual of
    w' = A_hat^m w + sum_k g_{k/m} A_hat^k x + f + sum_k g_{k/m} * A_hat^k f.
    Both are maxima over the grid nodes in [t_min, T].
    """
    p.validate()
    m = _one_over_m(p)
    cfg = cfg or QuadratureConfig.from_env()
    alpha = p.alpha
    B = p.generator
    a_hat = p.sign * p.A.entries
    x = p.initial_values[0]
    c = p.constant_forcing

    def w_at(t: float) -> np.ndarray:
        value = _homogeneous_term(B, alpha, 0, t, x, cfg)
        if t == 0.0 or p.forcing is None:
            return value
        if c is not None:
            return value + t * _ml_apply(B, alpha, 2.0, t, c)
        F = family_for(B, alpha)
        conv, _ = quad_vec_complex(lambda tau: s_alpha_apply(F, tau, p.forcing_at(t - tau), cfg), 0.0, t, cfg)
        return value + conv

    def g_conv_f(beta: float, t: float) -> np.ndarray:
        if p.forcing is None or t == 0.0:
            return np.zeros(p.dim)
        if c is not None:
            return g_kernel(beta + 1.0, t) * c
        return g_convolve(beta, p.forcing_at, t, cfg)

    w = np.array([w_at(float(t)) for t in p.grid])
    w = _realify(w, B, x, c)
    traj = Trajectory(p.grid, w)
    h = traj.step()
    caputo = caputo_l1(traj, alpha)
    r1 = 0.0
    for j, t in enumerate(p.grid[1:], start=1):
        if t < t_min:
            continue
        rhs = a_hat @ w[j] + g_conv_f(1.0 - alpha, float(t))
        r1 = max(r1, float(np.linalg.norm(caputo.states[j - 1] - rhs)))

    a_pow = [np.linalg.matrix_power(a_hat, k) for k in range(m + 1)]
    r2 = 0.0
    for j in range(1, p.grid.size - 1):
        t = float(p.grid[j])
        if t < t_min:
            continue
        dw = (w[j + 1] - w[j - 1]) / (2.0 * h)
        rhs = a_pow[m] @ w[j] + p.forcing_at(t)
        for k in range(1, m):
            rhs = rhs + g_kernel(k / m, t) * (a_pow[k] @ x) + a_pow[k] @ g_conv_f(k / m, t)
        r2 = max(r2, float(np.linalg.norm(dw - rhs)))
    logger.info(f"1/{m} inhomogeneous residuals: r1={r1:.3e}, r2={r2:.3e}")
    return r1, r2


def graded_grid(T: float, n: int, alpha: float) -> np.ndarray:
    """t_j = T (j/n)^r with r = min((2 - alpha)/alpha, 4)."""
    if not T > 0 or n < 1:
        raise GridError(f"need T > 0 and n >= 1, got T={T}, n={n}")
    r = min((2.0 - alpha) / alpha, 4.0)
    return T * (np.arange(n + 1) / n) ** r


def _banded(entries: np.ndarray) -> Optional[np.ndarray]:
    n = entries.shape[0]
    if n < 3 or np.any(np.triu(entries, 2)) or np.any(np.tril(entries, -2)):
        return None
    ab = np.zeros((3, n), dtype=entries.dtype)
    ab[0, 1:] = np.diag(entries, 1)
    ab[1, :] = np.diag(entries)
    ab[2, :-1] = np.diag(entries, -1)
    return ab


def l1_stepper(A: MatrixOperator, alpha: float, u0: np.ndarray, grid: np.ndarray) -> Trajectory:
    """
    Implicit L1 scheme for D_t^alpha u = -A u on an arbitrary grid from 0.

    The Caputo derivative at t_n is
    sum_j a_{n,j} (u_j - u_{j-1}) with
    a_{n,j} = [(t_n - t_{j-1})^{1-alpha} - (t_n - t_j)^{1-alpha}] / (Gamma(2-alpha) tau_j).
    alpha = 1 is backward Euler. Tridiagonal A goes through a banded solve.
    """
    if not 0 < alpha <= 1:
        raise ParameterError(f"L1 stepper needs alpha in (0, 1], got {alpha}")
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
        raise GridError("L1 grid must start at 0 and increase strictly")
    u0 = np.asarray(u0)
    entries = A.entries.real if A.is_real and np.isrealobj(u0) else A.entries
    dtype = entries.dtype
    n_steps = grid.size - 1
    tau = np.diff(grid)
    states = np.zeros((grid.size, A.dim), dtype=dtype)
    states[0] = u0
    increments = np.zeros((n_steps, A.dim), dtype=dtype)
    band = _banded(entries)
    norm = math.gamma(2.0 - alpha)
    eye = np.eye(A.dim)
    for n in range(1, n_steps + 1):
        if alpha == 1.0:
            lead = 1.0 / tau[n - 1]
            history = np.zeros(A.dim, dtype=dtype)
        else:
            t_n = grid[n]
            upper = (t_n - grid[:n]) ** (1.0 - alpha)
            lower = (t_n - grid[1:n + 1]) ** (1.0 - alpha)
            a = (upper - lower) / (norm * tau[:n])
            lead = a[-1]
            history = a[:-1] @ increments[:n - 1] if n > 1 else np.zeros(A.dim, dtype=dtype)
        rhs = lead * states[n - 1] - history
        if band is not None:
            ab = band.copy()
            ab[1] += lead
            states[n] = linalg.solve_banded((1, 1), ab, rhs)
        else:
            states[n] = linalg.solve(lead * eye + entries, rhs)
        increments[n - 1] = states[n] - states[n - 1]
    logger.debug(f"L1 stepper: {n_steps} steps, alpha={alpha}, final time {grid[-1]}")
    return Trajectory(grid, states)


def _bump(points: np.ndarray) -> np.ndarray:
    return 16.0 * points ** 2 * (1.0 - points) ** 2


@dataclass
class DiffusionResult:
    """Both diffusion routes plus their relative L-infinity discrepancy at T."""
    subordination: Trajectory
    stepper: Trajectory
    discrepancy: float
    N: int
    alpha: float
    h: float

    @property
    def points(self) -> np.ndarray:
        return self.h * np.arange(1, self.N + 1)


def fractional_diffusion_demo(N: int, alpha: float, T: float, f0: Optional[np.ndarray] = None,
                              steps: int = 2000, report_times: int = 41,
                              cfg: Optional[QuadratureConfig] = None) -> DiffusionResult:
    """
    D_t^alpha u = Delta_h u on (0, 1) with Dirichlet conditions, two ways.

    Route one subordinates the heat semigroup e^{-s(-Delta_h)} f0 with
    phi_alpha(t, s) at the report times; route two runs the L1 stepper on
    the graded grid. For alpha = 1 both routes are the heat semigroup
    (spectral versus scipy's expm).
    """
    if not 0 < alpha <= 1:
        raise ParameterError(f"diffusion order must lie in (0, 1], got {alpha}")
    if not T > 0:
        raise DomainError(f"final time must be positive, got {T}")
    if steps < 2:
        raise ParameterError(f"need at least 2 steps, got {steps}")
    cfg = cfg or QuadratureConfig.from_env()
    A = MatrixOperator.dirichlet_laplacian(N)
    h = 1.0 / (N + 1)
    points = h * np.arange(1, N + 1)
    f0 = _bump(points) if f0 is None else np.asarray(f0, dtype=float)
    if f0.shape != (N,):
        raise ParameterError(f"initial profile of length {N} expected, got shape {f0.shape}")
    times = np.linspace(0.0, T, max(report_times, 2))

    if alpha == 1.0:
        heat = ResolventFamily(A, 1.0)
        u1 = np.array([np.real(s_alpha_apply(heat, t, f0, cfg)) for t in times])
        u2 = np.array([linalg.expm(-t * A.entries.real) @ f0 for t in times])
        first = Trajectory(times, u1)
        second = Trajectory(times, u2)
    else:
        heat = ResolventFamily(A, 1.0)
        kernel = KernelSpec("phi", gamma=alpha)
        u1 = [f0.copy()]
        for t in times[1:]:
            u1.append(np.real(subordinate_apply(heat, kernel, float(t), f0, cfg)))
        first = Trajectory(times, np.array(u1))
        second = l1_stepper(A, alpha, f0, graded_grid(T, steps, alpha))

    final_sub, final_step = first.states[-1], second.states[-1]
    discrepancy = float(np.abs(final_sub - final_step).max() / max(np.abs(final_sub).max(), 1e-300))
    logger.info(f"diffusion demo N={N}, alpha={alpha}, T={T}: relative discrepancy {discrepancy:.3e}")
    return DiffusionResult(first, second, discrepancy, N, alpha, h)


def caputo_residual(traj: Trajectory, problem: CauchyProblem) -> np.ndarray:
    """||D_t^alpha u - (sign A u + f)|| at grid[1:], with D_t^alpha from the L1 scheme."""
    if not 0 < problem.alpha <= 1:
        raise ParameterError(f"L1 residual needs alpha in (0, 1], got {problem.alpha}")
    derivative = caputo_l1(traj, problem.alpha)
    out = np.empty(derivative.grid.size)
    for j, t in enumerate(derivative.grid):
        rhs = problem.sign * (problem.A.entries @ traj.states[j + 1]) + problem.forcing_at(float(t))
        out[j] = float(np.linalg.norm(derivative.states[j] - rhs))
    return out
