"""
Time-indexed state records shared by the Caputo oracle and the Cauchy solvers.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from utils.errors import GridError

logger = logging.getLogger(__name__)


@dataclass
class Trajectory:
    """Time grid plus one state vector per grid point."""
    grid: np.ndarray
    states: np.ndarray
    residual_caputo: Optional[np.ndarray] = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float).ravel()
        states = np.asarray(self.states)
        if states.ndim == 1:
            states = states.reshape(-1, 1)
        if not np.iscomplexobj(states):
            states = states.astype(float)
        self.states = states
        if self.states.shape[0] != self.grid.size:
            raise GridError(
                f"trajectory has {self.grid.size} times but {self.states.shape[0]} states")
        if self.residual_caputo is not None:
            self.residual_caputo = np.asarray(self.residual_caputo, dtype=float)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def __len__(self) -> int:
        return self.grid.size

    def component(self, i: int) -> np.ndarray:
        return self.states[:, i]

    def at(self, t: float) -> np.ndarray:
        """State at the grid point nearest to t."""
        return self.states[int(np.argmin(np.abs(self.grid - t)))]

    def step(self) -> float:
        """Uniform step of the grid; raises GridError if the grid is not uniform."""
        if self.grid.size < 2:
            raise GridError("grid needs at least two points")
        steps = np.diff(self.grid)
        h = steps[0]
        if not h > 0 or not np.allclose(steps, h, rtol=1e-9, atol=1e-14):
            raise GridError("time grid is not uniform")
        return float(h)
