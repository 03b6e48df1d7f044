"""Synthetic IMU streams from piecewise-constant body-frame inputs.

A scenario is a start state plus an ordered list of segments, each holding
a constant specific force ``a_body`` and body rate ``w_body`` for a duration
that must be a whole number of IMU periods. Because the proposed model is
the exact solution of each constant-input interval, stepping it at the IMU
rate gives ground truth; ``fine_oracle`` re-derives that truth with sub-steps
as an independent check.

Scenario files are TOML::

    imu_rate = 100.0
    gravity = [0.0, 0.0, -9.81]

    [initial]
    t = 0.0
    p = [0.0, 0.0, 0.0]
    v = [0.0, 0.0, 0.0]
    rotvec = [0.0, 0.0, 0.0]     # or R = [[...], [...], [...]]

    [noise]                      # optional
    gyro = 0.0                   # rad/s, per-axis std
    accel = 0.0                  # m/s^2

    [[segment]]
    duration = 1.0
    a_body = [1.0, 0.0, 0.0]
    w_body = [0.0, 0.0, 2.0]
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .preintegration import GRAVITY, step_proposed
from .so3 import is_rotation, mat_E, series_matrices
from .state import ImuSample, NavState, Trajectory, vec3

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

COMMENSURATE_TOL = 1e-9


class ScenarioError(ValueError):
    """Invalid scenario; the message names the offending field."""


@dataclass(frozen=True, eq=False)
class SegmentSpec:
    duration: float
    a_body: np.ndarray
    w_body: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a_body", vec3(self.a_body))
        object.__setattr__(self, "w_body", vec3(self.w_body))
        if not (np.isfinite(self.duration) and self.duration > 0):
            raise ScenarioError(f"segment.duration must be positive, got {self.duration}")


@dataclass(eq=False)
class ScenarioSpec:
    initial: NavState
    segments: list[SegmentSpec]
    imu_rate: float
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY.copy())
    gyro_noise: float = 0.0
    accel_noise: float = 0.0

    def __post_init__(self):
        self.gravity = vec3(self.gravity)
        self.validate()

    def validate(self) -> None:
        if not (np.isfinite(self.imu_rate) and self.imu_rate > 0):
            raise ScenarioError(f"imu_rate must be positive, got {self.imu_rate}")
        if not self.segments:
            raise ScenarioError("segment: at least one segment is required")
        if self.gyro_noise < 0 or self.accel_noise < 0:
            raise ScenarioError("noise: standard deviations must be non-negative")
        if not is_rotation(self.initial.R):
            raise ScenarioError("initial.R is not a rotation matrix")
        for i, seg in enumerate(self.segments):
            n = seg.duration * self.imu_rate
            if abs(n - round(n)) > COMMENSURATE_TOL * max(1.0, n) or round(n) < 1:
                raise ScenarioError(
                    f"segment[{i}].duration {seg.duration} is not a whole number of "
                    f"periods at imu_rate {self.imu_rate}")

    def sample_counts(self) -> list[int]:
        return [int(round(seg.duration * self.imu_rate)) for seg in self.segments]

    def inputs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Noiseless per-sample stamps, gyro and accel arrays."""
        counts = self.sample_counts()
        n = sum(counts)
        t = self.initial.t + np.arange(n) / self.imu_rate
        w = np.concatenate([np.tile(s.w_body, (c, 1)) for s, c in zip(self.segments, counts)])
        a = np.concatenate([np.tile(s.a_body, (c, 1)) for s, c in zip(self.segments, counts)])
        return t, w, a


def generate(scenario: ScenarioSpec, seed: int = 0) -> tuple[list[ImuSample], Trajectory]:
    """IMU samples (optionally noisy) and the exact truth at every sample instant.

    Truth holds one more state than there are samples: the final state closes
    the last interval.
    """
    scenario.validate()
    t, w, a = scenario.inputs()
    dt = 1.0 / scenario.imu_rate
    states = [scenario.initial]
    x = scenario.initial
    for k in range(len(t)):
        x = step_proposed(x, a[k], w[k], dt, scenario.gravity)
        # pin stamps to the grid so truth and samples share exact times
        x = NavState(scenario.initial.t + (k + 1) / scenario.imu_rate, x.p, x.v, x.R)
        states.append(x)
    rng = np.random.default_rng(seed)
    w_meas = w + rng.normal(0.0, 1.0, size=w.shape) * scenario.gyro_noise
    a_meas = a + rng.normal(0.0, 1.0, size=a.shape) * scenario.accel_noise
    samples = [ImuSample(t[k], w_meas[k], a_meas[k]) for k in range(len(t))]
    return samples, Trajectory(states)


def fine_oracle(scenario: ScenarioSpec, substeps: int = 100) -> Trajectory:
    """Truth recomputed with every IMU interval split into ``substeps`` steps."""
    if substeps < 10:
        raise ValueError("substeps must be >= 10")
    scenario.validate()
    t, w, a = scenario.inputs()
    h = 1.0 / (scenario.imu_rate * substeps)
    g = scenario.gravity
    p, v, R = scenario.initial.p.copy(), scenario.initial.v.copy(), scenario.initial.R.copy()
    states = [scenario.initial]
    for k in range(len(t)):
        # inputs are constant within the interval, so the series matrices are too;
        # the update is step_proposed's without per-call validation
        E, G, L = series_matrices(w[k] * h)
        La, Ga = L @ a[k], G @ a[k]
        for _ in range(substeps):
            p = p + v * h + (0.5 * g + R @ La) * h * h
            v = v + (g + R @ Ga) * h
            R = R @ E
        states.append(NavState(scenario.initial.t + (k + 1) / scenario.imu_rate, p, v, R))
    return Trajectory(states)


_TOP_KEYS = {"imu_rate", "gravity", "initial", "noise", "segment"}
_INITIAL_KEYS = {"t", "p", "v", "R", "rotvec"}
_NOISE_KEYS = {"gyro", "accel"}
_SEGMENT_KEYS = {"duration", "a_body", "w_body"}


def _reject_unknown(table: dict, allowed: set, where: str) -> None:
    extra = sorted(set(table) - allowed)
    if extra:
        raise ScenarioError(f"{where}: unknown key(s) {', '.join(extra)}")


def _vec(table: dict, key: str, where: str, default=None) -> np.ndarray:
    if key not in table:
        if default is None:
            raise ScenarioError(f"{where}.{key} is required")
        return np.asarray(default, dtype=float)
    try:
        v = np.asarray(table[key], dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(f"{where}.{key} must be numeric") from None
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ScenarioError(f"{where}.{key} must be three finite numbers")
    return v


def _number(table: dict, key: str, where: str, default=None) -> float:
    if key not in table:
        if default is None:
            raise ScenarioError(f"{where}{key} is required")
        return float(default)
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}{key} must be a number")
    return float(value)


def scenario_from_dict(data: dict, imu_rate: float | None = None,
                       gravity_z: float | None = None) -> ScenarioSpec:
    """Build a ScenarioSpec from parsed TOML; ``imu_rate``/``gravity_z`` override the file."""
    _reject_unknown(data, _TOP_KEYS, "scenario")
    rate = imu_rate if imu_rate is not None else _number(data, "imu_rate", "")
    gravity = _vec(data, "gravity", "scenario", default=GRAVITY)
    if gravity_z is not None:
        gravity = np.array([0.0, 0.0, float(gravity_z)])

    init = data.get("initial", {})
    _reject_unknown(init, _INITIAL_KEYS, "initial")
    if "R" in init and "rotvec" in init:
        raise ScenarioError("initial: give either R or rotvec, not both")
    if "R" in init:
        R = np.asarray(init["R"], dtype=float)
        if R.shape != (3, 3):
            raise ScenarioError("initial.R must be a 3x3 array")
    else:
        R = mat_E(_vec(init, "rotvec", "initial", default=np.zeros(3)))
    initial = NavState(
        _number(init, "t", "initial.", default=0.0),
        _vec(init, "p", "initial", default=np.zeros(3)),
        _vec(init, "v", "initial", default=np.zeros(3)),
        R,
    )

    noise = data.get("noise", {})
    _reject_unknown(noise, _NOISE_KEYS, "noise")
    segments = []
    for i, seg in enumerate(data.get("segment", [])):
        where = f"segment[{i}]"
        _reject_unknown(seg, _SEGMENT_KEYS, where)
        segments.append(SegmentSpec(
            _number(seg, "duration", where + "."),
            _vec(seg, "a_body", where, default=np.zeros(3)),
            _vec(seg, "w_body", where, default=np.zeros(3)),
        ))
    return ScenarioSpec(
        initial=initial,
        segments=segments,
        imu_rate=rate,
        gravity=gravity,
        gyro_noise=_number(noise, "gyro", "noise.", default=0.0),
        accel_noise=_number(noise, "accel", "noise.", default=0.0),
    )


def load_scenario(path, imu_rate: float | None = None,
                  gravity_z: float | None = None) -> ScenarioSpec:
    path = Path(path)
    try:
        with path.open("rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: {exc}") from None
    return scenario_from_dict(data, imu_rate=imu_rate, gravity_z=gravity_z)
