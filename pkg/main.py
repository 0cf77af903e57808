#!/usr/bin/env python3
"""
Fractional Resolvent Toolkit
Evaluates Mittag-Leffler and Wright functions, subordination kernels,
fractional matrix powers and fractional Cauchy problems, and runs the
verification suites.
"""

import argparse
import logging
import math
import os
import sys
from datetime import datetime, timezone
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from backend.database.database import record_verification
from collectors.stable_sampler import (
    StableSampler, mc_composed_solution, mc_fractional_solution, mc_power_solution,
)
from utils.cauchy import CauchyProblem, fractional_diffusion_demo, solve_homogeneous
from utils.errors import ParameterError, exit_code_for
from utils.kernels import FAMILIES, KernelSpec, kernel_laplace_check, kernel_table
from utils.linop import MatrixOperator, fractional_power, load_matrix
from utils.quadrature import QuadratureConfig
from utils.specfun import ml, wright_psi
from utils.table_writer import (
    diffusion_frame, matrix_frame, mc_frame, trajectory_frame, value_frame, verify_frame, write_table,
)
from utils.verification import SUITES, run_suite

# Load environment variables
load_dotenv()

# Configure logging; stdout carries the CSV, diagnostics go to stderr
_handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
if os.getenv('FRACRES_LOG_FILE'):
    _handlers.append(logging.FileHandler(os.getenv('FRACRES_LOG_FILE')))
logging.basicConfig(
    level=getattr(logging, os.getenv('FRACRES_LOG_LEVEL', 'WARNING').upper(), logging.WARNING),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=_handlers
)

logger = logging.getLogger(__name__)

COMMANDS = ("ml", "wright", "kernel", "power", "solve", "verify", "diffusion", "mc")


class UsageError(Exception):
    """argparse rejected the command line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")


def _complex(text: str) -> complex:
    parts = text.split(',')
    try:
        if len(parts) == 1:
            return complex(float(parts[0]))
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected re or re,im, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fracres", description="Fractional Resolvent Toolkit")
    parser.add_argument("command", choices=COMMANDS, help="What to compute")
    parser.add_argument("--alpha", type=float, help="Order alpha")
    parser.add_argument("--beta", type=float, help="Second Mittag-Leffler parameter or subordination power")
    parser.add_argument("--gamma", type=float, help="Wright index or target order")
    parser.add_argument("--b", type=float, help="Exponent of the fractional power")
    parser.add_argument("--t", type=_floats, help="Time or comma list of times")
    parser.add_argument("--s", type=_floats, help="Comma list of kernel arguments s")
    parser.add_argument("--z", type=_complex, nargs="+", help="Points, each re or re,im")
    parser.add_argument("--lambda", dest="lam", type=_floats,
                        help="Laplace variables (kernel) or relaxation rate (mc)")
    parser.add_argument("--matrix", help="Matrix file")
    parser.add_argument("--n", type=int, help="Grid size of the diffusion demo")
    parser.add_argument("--steps", type=int, help="Number of time steps")
    parser.add_argument("--t-end", dest="t_end", type=float, help="Final time")
    parser.add_argument("--samples", type=int, help="Monte Carlo sample count")
    parser.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")
    parser.add_argument("--tol", type=float, help="Tolerance override")
    parser.add_argument("--out", help="Write the CSV here instead of stdout")
    parser.add_argument("--suite", choices=SUITES, default="all", help="Verification suite")
    parser.add_argument("--family", choices=FAMILIES, help="Kernel family")
    return parser


class FracResCLI:
    """Main orchestrator for the command-line surface."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.cfg = QuadratureConfig.from_env()
        if args.tol is not None and args.command != "verify":
            self.cfg = self.cfg.with_tolerance(args.tol)

    def run(self) -> int:
        handler = getattr(self, f"cmd_{self.args.command}")
        logger.info(f"Running {self.args.command}")
        return handler()

    def _emit(self, df: pd.DataFrame, meta=None) -> None:
        write_table(df, self.args.out, meta)

    def _require(self, name: str):
        value = getattr(self.args, name)
        if value is None:
            raise ParameterError(f"{self.args.command} needs --{name.replace('_', '-')}")
        return value

    def _operator(self) -> MatrixOperator:
        if self.args.matrix:
            return load_matrix(self.args.matrix)
        return MatrixOperator.scalar(1.0)

    def _single_time(self, default: float) -> float:
        times = self.args.t
        if times is None:
            return self.args.t_end if self.args.t_end is not None else default
        if len(times) != 1:
            raise ParameterError(f"{self.args.command} takes a single --t, got {len(times)} values")
        return times[0]

    def cmd_ml(self) -> int:
        alpha = self._require("alpha")
        beta = self.args.beta if self.args.beta is not None else 1.0
        z = np.array(self._require("z"), dtype=complex)
        values = ml(z if np.any(z.imag) else z.real, alpha, beta)
        self._emit(value_frame(z, np.atleast_1d(values), alpha=alpha, beta=beta))
        return 0

    def cmd_wright(self) -> int:
        gamma = self._require("gamma")
        z = self._require("z")
        values = [wright_psi(gamma, v if v.imag else v.real) for v in z]
        self._emit(value_frame(z, values, gamma=gamma))
        return 0

    def _kernel_spec(self) -> KernelSpec:
        a = self.args
        spec = KernelSpec(self._require("family"),
                          alpha=a.alpha if a.alpha is not None else 1.0,
                          gamma=a.gamma if a.gamma is not None else 1.0,
                          beta=a.beta if a.beta is not None else 1.0)
        spec.validate()
        return spec

    def cmd_kernel(self) -> int:
        spec = self._kernel_spec()
        t_values = self._require("t")
        if self.args.lam is not None:
            rows = []
            for t in t_values:
                residuals = kernel_laplace_check(spec, t, self.args.lam, self.cfg)
                rows.extend({'family': spec.family, 't': t, 'lambda': lam, 'residual': r}
                            for lam, r in zip(self.args.lam, residuals))
            self._emit(pd.DataFrame(rows, columns=['family', 't', 'lambda', 'residual']))
            return 0
        self._emit(kernel_table(spec, t_values, self._require("s"), self.cfg))
        return 0

    def cmd_power(self) -> int:
        A = load_matrix(self._require("matrix"))
        power = fractional_power(A, self._require("b"), self.cfg)
        self._emit(matrix_frame(power.entries))
        return 0

    def cmd_solve(self) -> int:
        A = self._operator()
        alpha = self._require("alpha")
        t_end = self._single_time(1.0)
        steps = self.args.steps or 100
        if steps < 1:
            raise ParameterError(f"--steps must be positive, got {steps}")
        initial = [np.ones(A.dim)] + [np.zeros(A.dim)] * (math.ceil(alpha) - 1)
        problem = CauchyProblem(A, alpha, initial, np.linspace(0.0, t_end, steps + 1))
        self._emit(trajectory_frame(solve_homogeneous(problem, self.cfg)))
        return 0

    def cmd_diffusion(self) -> int:
        n = self.args.n or 64
        alpha = self.args.alpha if self.args.alpha is not None else 0.5
        result = fractional_diffusion_demo(n, alpha, self._single_time(1.0),
                                           steps=self.args.steps or 2000, cfg=self.cfg)
        meta = {'N': n, 'alpha': alpha, 'h': result.h, 'discrepancy': result.discrepancy}
        self._emit(diffusion_frame(result.points, result.subordination.states[-1],
                                   result.stepper.states[-1]), meta)
        return 0

    def cmd_mc(self) -> int:
        a = self.args
        alpha = a.alpha if a.alpha is not None else 0.5
        t = self._single_time(1.0)
        count = a.samples or 100_000
        sampler = StableSampler(alpha, a.seed, count)
        sampler.validate()
        A = self._operator()
        if a.lam is not None:
            if a.matrix:
                raise ParameterError("mc takes either --matrix or --lambda, not both")
            A = MatrixOperator.diagonal(a.lam)
        x = np.ones(A.dim)
        w, v, v_inv = A.spectral_cache if A.diagonalizable else (None, None, None)
        if w is None:
            raise ParameterError("mc needs a diagonalizable generator")
        coeffs = v_inv @ x

        def semigroup(s: float) -> np.ndarray:
            return np.real_if_close(v @ (np.exp(-s * w) * coeffs))

        family = a.family or "phi"
        if family == "phi":
            estimate, stderr = mc_fractional_solution(semigroup, alpha, t, sampler)
        elif family == "p":
            estimate, stderr = mc_power_solution(semigroup, alpha, t, sampler)
        elif family == "f":
            beta = a.beta if a.beta is not None else alpha
            gamma = a.gamma if a.gamma is not None else alpha
            estimate, stderr = mc_composed_solution(semigroup, beta, gamma, t, sampler)
        else:
            raise ParameterError(f"mc supports the phi, p and f families, got {family!r}")
        self._emit(mc_frame(estimate, stderr, count, a.seed))
        return 0

    def cmd_verify(self) -> int:
        started = datetime.now(timezone.utc)
        suite = self.args.suite
        try:
            outcomes = run_suite(suite, self.cfg, self.args.tol)
        except Exception as e:
            record_verification(suite, [], self._ledger_parameters(), started, error=str(e))
            raise
        self._emit(verify_frame(o.as_row() for o in outcomes))
        record_verification(suite, outcomes, self._ledger_parameters(), started)
        failed = [o.criterion for o in outcomes if not o.passed]
        if failed:
            logger.error(f"Criteria failed: {failed}")
            return 3
        return 0

    def _ledger_parameters(self) -> dict:
        return {
            'tol': self.args.tol,
            'threads': os.getenv('FRACRES_THREADS', '0'),
            'rel_tol': self.cfg.rel_tol,
            'abs_tol': self.cfg.abs_tol,
        }


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse argv, execute the command and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return 2
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 0
    try:
        return FracResCLI(args).run()
    except Exception as e:
        code = exit_code_for(e)
        logger.error(f"{args.command} failed ({type(e).__name__}): {e}")
        sys.stderr.write(f"error: {e}\n")
        return code


def main():
    """Main entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()
