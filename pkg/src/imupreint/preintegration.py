"""Single-step and keyframe-to-keyframe IMU integration under two models.

``classical``: world-frame acceleration held constant over each sample
interval (rotation frozen at the interval start for the translational part).

``proposed``: body-frame acceleration and angular rate held constant; the
interval ODE is solved exactly through Gamma and Lambda, so integration is
exact whenever the inputs really are piecewise constant in the body frame.

Each input sample is held from its own stamp to the next one. A batch over
keyframes i..j therefore consumes the measurements at i..j-1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .so3 import mat_E, orthonormality_residual, project_to_rotation, series_matrices
from .state import ImuSample, NavState, vec3

GRAVITY = np.array([0.0, 0.0, -9.81])

CLASSICAL = "classical"
PROPOSED = "proposed"
MODELS = (CLASSICAL, PROPOSED)

# re-orthonormalize accumulated rotations this often, or sooner on drift
RENORM_EVERY = 1000
RENORM_TOL = 1e-7


def _check_model(model: str) -> None:
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}, expected one of {MODELS}")


def _check_step_inputs(x: NavState, a, w, dt, g):
    a, w, g = vec3(a), vec3(w), vec3(g)
    if not (np.isfinite(dt) and x.is_finite() and np.all(np.isfinite(a))
            and np.all(np.isfinite(w)) and np.all(np.isfinite(g))):
        raise ValueError("non-finite input to integration step")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return a, w, g


def _renormalized(R: np.ndarray, steps: int) -> np.ndarray:
    if steps % RENORM_EVERY == 0 or orthonormality_residual(R) > RENORM_TOL:
        return project_to_rotation(R)
    return R


@dataclass(frozen=True, eq=False)
class PreintDelta:
    """Compound measurement between two keyframes.

    ``F`` is the accumulated body rotation, ``zeta`` and ``mu`` the position
    and velocity increments expressed in the body frame at the first
    keyframe, ``dT`` the total elapsed time. Gravity and the initial velocity
    are not included; ``apply_delta`` adds them.
    """

    F: np.ndarray
    zeta: np.ndarray
    mu: np.ndarray
    dT: float
    model: str

    @classmethod
    def identity(cls, model: str = PROPOSED) -> "PreintDelta":
        _check_model(model)
        return cls(np.eye(3), np.zeros(3), np.zeros(3), 0.0, model)


@dataclass(frozen=True, eq=False)
class Transform:
    """Rigid map from body coordinates at keyframe i to body coordinates at j."""

    rot: np.ndarray
    trans: np.ndarray

    def inverse(self) -> "Transform":
        return Transform(self.rot.T, -self.rot.T @ self.trans)


def step_classical(x: NavState, a, w, dt: float, g=GRAVITY) -> NavState:
    a, w, g = _check_step_inputs(x, a, w, dt, g)
    Ra = x.R @ a
    p = x.p + x.v * dt + 0.5 * g * dt * dt + 0.5 * Ra * dt * dt
    v = x.v + g * dt + Ra * dt
    return NavState(x.t + dt, p, v, x.R @ mat_E(w * dt))


def step_proposed(x: NavState, a, w, dt: float, g=GRAVITY) -> NavState:
    a, w, g = _check_step_inputs(x, a, w, dt, g)
    E, G, L = series_matrices(w * dt)
    p = x.p + x.v * dt + (0.5 * g + x.R @ (L @ a)) * dt * dt
    v = x.v + (g + x.R @ (G @ a)) * dt
    return NavState(x.t + dt, p, v, x.R @ E)


STEPS = {CLASSICAL: step_classical, PROPOSED: step_proposed}


def _intervals(samples: Sequence[ImuSample], t_end: float | None):
    if len(samples) == 0:
        raise ValueError("no IMU samples to integrate")
    times = np.array([s.t for s in samples], dtype=float)
    if not np.all(np.isfinite(times)):
        raise ValueError("non-finite sample timestamp")
    if len(times) > 1 and not np.all(np.diff(times) > 0):
        k = int(np.argmin(np.diff(times) > 0)) + 1
        raise ValueError(f"sample timestamps not strictly increasing at index {k}")
    dts = list(np.diff(times))
    if t_end is not None:
        if not t_end > times[-1]:
            raise ValueError(f"t_end {t_end} must be after the last sample at {times[-1]}")
        dts.append(t_end - times[-1])
    return dts


def integrate(x0: NavState, samples: Sequence[ImuSample], model: str = PROPOSED,
              g=GRAVITY, t_end: float | None = None) -> list[NavState]:
    """Step ``x0`` through every sample interval; returns all states including ``x0``."""
    _check_model(model)
    step = STEPS[model]
    dts = _intervals(samples, t_end)
    states = [x0]
    x = x0
    for k, dt in enumerate(dts, start=1):
        s = samples[k - 1]
        x = step(x, s.a, s.w, dt, g)
        R = _renormalized(x.R, k)
        if R is not x.R:
            x = NavState(x.t, x.p, x.v, R)
        states.append(x)
    return states


def preintegrate(samples: Sequence[ImuSample], model: str = PROPOSED,
                 t_end: float | None = None) -> PreintDelta:
    """Fold the samples between two keyframes into one PreintDelta.

    The last sample only provides the closing timestamp unless ``t_end`` is
    given, in which case it is held until ``t_end``.
    """
    _check_model(model)
    dts = _intervals(samples, t_end)
    F = np.eye(3)
    zeta = np.zeros(3)
    mu = np.zeros(3)
    total = 0.0
    for k, dt in enumerate(dts):
        s = samples[k]
        if model == PROPOSED:
            E, G, L = series_matrices(s.w * dt)
            zeta = zeta + (F @ (L @ s.a)) * dt * dt + mu * dt
            mu = mu + (F @ (G @ s.a)) * dt
        else:
            E = mat_E(s.w * dt)
            Fa = F @ s.a
            zeta = zeta + 0.5 * Fa * dt * dt + mu * dt
            mu = mu + Fa * dt
        F = _renormalized(F @ E, k + 1)
        total += dt
    return PreintDelta(F, zeta, mu, total, model)


def _theta_term(xi: NavState, dT: float, g) -> np.ndarray:
    return xi.v * dT + 0.5 * g * dT * dT


def apply_delta(xi: NavState, d: PreintDelta, g=GRAVITY) -> NavState:
    """State at keyframe j from the state at i and the compound measurement."""
    if d.dT < 0:
        raise ValueError("delta with negative elapsed time")
    g = vec3(g)
    p = xi.p + _theta_term(xi, d.dT, g) + xi.R @ d.zeta
    v = xi.v + g * d.dT + xi.R @ d.mu
    return NavState(xi.t + d.dT, p, v, xi.R @ d.F)


def transform_between(xi: NavState, d: PreintDelta, g=GRAVITY) -> Transform:
    """Relative pose T(i, j) mapping body-i coordinates into body-j coordinates."""
    if d.dT < 0:
        raise ValueError("delta with negative elapsed time")
    Ft = d.F.T
    theta = _theta_term(xi, d.dT, vec3(g))
    return Transform(Ft, -Ft @ (d.zeta + xi.R.T @ theta))


def integrate_keyframes(x0: NavState, samples: Sequence[ImuSample], keyframes: Sequence[int],
                        model: str = PROPOSED, g=GRAVITY) -> list[NavState]:
    """Dead-reckon from ``x0`` (at ``samples[keyframes[0]]``) through each keyframe window.

    Returns one state per keyframe.
    """
    _check_model(model)
    states = [x0]
    x = x0
    for i, j in zip(keyframes[:-1], keyframes[1:]):
        d = preintegrate(samples[i : j + 1], model)
        x = apply_delta(x, d, g)
        # keep the stamp on the sample grid rather than the running sum
        x = NavState(samples[j].t, x.p, x.v, x.R)
        states.append(x)
    return states
