"""
CSV layouts for every table the CLI and the verification runner emit.
All numbers are written with 17 significant digits.
"""

import io
import sys
import logging
from typing import Dict, Iterable, Optional, Sequence

import numpy as np
import pandas as pd

from utils.trajectory import Trajectory

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'

MC_COLUMNS = ['estimate', 'stderr', 'n', 'seed']
VERIFY_COLUMNS = ['criterion', 'suite', 'description', 'value', 'threshold', 'passed']
DIFFUSION_COLUMNS = ['x', 'u_subordination', 'u_l1']


def render(df: pd.DataFrame, meta: Optional[Dict[str, float]] = None) -> str:
    """CSV text of a frame, optionally preceded by a '# meta k=v ...' line."""
    buffer = io.StringIO()
    if meta:
        pairs = ' '.join(f"{k}={FLOAT_FORMAT % v if isinstance(v, float) else v}" for k, v in meta.items())
        buffer.write(f"# meta {pairs}\n")
    df.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return buffer.getvalue()


def write_table(df: pd.DataFrame, out: Optional[str] = None,
                meta: Optional[Dict[str, float]] = None) -> str:
    """
    Write a frame to ``out`` or to stdout.

    Raises:
        OSError: the output file cannot be written
    """
    text = render(df, meta)
    if out:
        with open(out, 'w', encoding='utf-8', newline='') as handle:
            handle.write(text)
        logger.info(f"wrote {len(df)} rows to {out}")
    else:
        sys.stdout.write(text)
    return text


def _split_complex(name: str, values: np.ndarray) -> Dict[str, np.ndarray]:
    values = np.asarray(values)
    if np.iscomplexobj(values) and np.any(values.imag != 0.0):
        return {f"{name}_re": values.real, f"{name}_im": values.imag}
    return {name: np.real(values)}


def value_frame(z: Sequence[complex], values: Sequence[complex], **params: float) -> pd.DataFrame:
    """ml / wright rows: parameters, z_re, z_im, re, im."""
    z = np.asarray(z, dtype=complex)
    values = np.asarray(values, dtype=complex)
    data = {k: np.full(z.size, v) for k, v in params.items()}
    data.update({'z_re': z.real, 'z_im': z.imag, 're': values.real, 'im': values.imag})
    return pd.DataFrame(data)


def matrix_frame(m: np.ndarray) -> pd.DataFrame:
    """One row per matrix row; complex matrices get re_j and im_j columns."""
    m = np.atleast_2d(np.asarray(m))
    data = {}
    for j in range(m.shape[1]):
        data.update(_split_complex(f"col_{j}", m[:, j]))
    if any(k.endswith('_im') for k in data):
        ordered = [f"col_{j}_re" for j in range(m.shape[1])] + [f"col_{j}_im" for j in range(m.shape[1])]
        data = {k: data.get(k, np.zeros(m.shape[0])) for k in ordered}
    return pd.DataFrame(data)


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    """t, component_0, ..., component_{n-1}."""
    data = {'t': traj.grid}
    for i in range(traj.dim):
        data.update(_split_complex(f"component_{i}", traj.component(i)))
    return pd.DataFrame(data)


def mc_frame(estimate: np.ndarray, stderr: np.ndarray, n: int, seed: int) -> pd.DataFrame:
    """One row per component of a Monte Carlo estimate."""
    estimate = np.atleast_1d(np.real(estimate))
    stderr = np.atleast_1d(np.real(stderr))
    return pd.DataFrame({
        'estimate': estimate,
        'stderr': stderr,
        'n': np.full(estimate.size, n, dtype=np.int64),
        'seed': np.full(estimate.size, seed, dtype=np.uint64),
    }, columns=MC_COLUMNS)


def verify_frame(rows: Iterable[Dict]) -> pd.DataFrame:
    """Verification rows in criterion order."""
    return pd.DataFrame(list(rows), columns=VERIFY_COLUMNS)


def diffusion_frame(points: np.ndarray, u_subordination: np.ndarray, u_l1: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame({
        'x': points,
        'u_subordination': np.real(u_subordination),
        'u_l1': np.real(u_l1),
    }, columns=DIFFUSION_COLUMNS)
