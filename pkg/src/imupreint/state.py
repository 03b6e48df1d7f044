"""Value types shared across the package."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


def vec3(x) -> np.ndarray:
    v = np.asarray(x, dtype=float).reshape(3)
    return v


@dataclass(frozen=True, eq=False)
class ImuSample:
    """One gyroscope + accelerometer reading in the body frame.

    ``a`` is the specific force: world acceleration is ``R @ a + g``.
    """

    t: float
    w: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "w", vec3(self.w))
        object.__setattr__(self, "a", vec3(self.a))


@dataclass(frozen=True, eq=False)
class NavState:
    """Position, velocity (world frame) and body-to-world rotation at time ``t``."""

    t: float
    p: np.ndarray
    v: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "p", vec3(self.p))
        object.__setattr__(self, "v", vec3(self.v))
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float).reshape(3, 3))

    @classmethod
    def at_rest(cls, t: float = 0.0) -> "NavState":
        return cls(t, np.zeros(3), np.zeros(3), np.eye(3))

    def is_finite(self) -> bool:
        return bool(
            np.isfinite(self.t)
            and np.all(np.isfinite(self.p))
            and np.all(np.isfinite(self.v))
            and np.all(np.isfinite(self.R))
        )


class Trajectory(Sequence[NavState]):
    """Time-ordered sequence of NavStates with strictly increasing stamps."""

    def __init__(self, states: Iterable[NavState] = ()):
        self._states = list(states)
        times = self.times
        if len(times) > 1 and not np.all(np.diff(times) > 0):
            bad = int(np.argmin(np.diff(times) > 0)) + 1
            raise ValueError(f"trajectory timestamps not strictly increasing at index {bad}")

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Trajectory(self._states[i])
        return self._states[i]

    def __len__(self) -> int:
        return len(self._states)

    def __repr__(self) -> str:
        if not self._states:
            return "Trajectory([])"
        return f"Trajectory(n={len(self)}, t=[{self.times[0]:.6f}, {self.times[-1]:.6f}])"

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self._states], dtype=float)

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.p for s in self._states], dtype=float).reshape(-1, 3)

    @property
    def velocities(self) -> np.ndarray:
        return np.array([s.v for s in self._states], dtype=float).reshape(-1, 3)

    @property
    def rotations(self) -> np.ndarray:
        return np.array([s.R for s in self._states], dtype=float).reshape(-1, 3, 3)
