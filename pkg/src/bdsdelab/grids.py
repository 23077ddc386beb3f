"""Uniform time grids on [0, T]."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition 0 = t_0 < t_1 < ... < t_n = T."""

    horizon: float
    n_steps: int
    nodes: np.ndarray = field(repr=False)

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return self.horizon == other.horizon and self.n_steps == other.n_steps


def make_uniform_grid(horizon: float, n_steps: int) -> TimeGrid:
    """Build a uniform grid; endpoints are exact, spacing is T / n_steps."""
    if not horizon > 0:
        raise InvalidArgument(f"horizon must be positive, got {horizon}")
    if n_steps < 1:
        raise InvalidArgument(f"n_steps must be >= 1, got {n_steps}")
    nodes = np.arange(n_steps + 1, dtype=np.float64) * (horizon / n_steps)
    nodes[-1] = horizon  # pin the endpoint against accumulated rounding
    nodes.setflags(write=False)
    return TimeGrid(horizon=float(horizon), n_steps=int(n_steps), nodes=nodes)
