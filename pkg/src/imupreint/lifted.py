"""The 15-dimensional lifted kinematics and its exact one-step exponential.

Stacking position, velocity and the three columns ``r1, r2, r3`` of
``R_WB = R_BW^T`` into ``x = [p; v; r1; r2; r3]`` turns the strapdown
equations into the linear system

    x' = A(1, a_B, w_B) x + [0; g; 0; 0; 0]

with ``A(s, a, w)`` block upper triangular: ``s*I`` at block (0, 1), the
selector blocks ``hat_A(a, i) = e_i a^T`` across row 1 and ``-skew(w)`` on
the last three diagonal blocks. Holding ``a_B`` and ``w_B`` fixed over
``dt`` the step is ``x+ = exp(A(dt, dt*a_B, w_B*dt)) x + b``; the exponent
closes in terms of E, Gamma and Lambda evaluated at ``-theta``.
"""
from __future__ import annotations

import math

import numpy as np

from .so3 import mat_E, mat_Gamma, mat_Lambda, skew
from .state import NavState, vec3

SERIES_TERMS = 30


def hat_A(a, i: int) -> np.ndarray:
    """3x3 matrix whose row ``i`` is ``a`` and whose other rows are zero."""
    out = np.zeros((3, 3))
    out[i] = vec3(a)
    return out


def build_A(s: float, a, w) -> np.ndarray:
    A = np.zeros((15, 15))
    A[0:3, 3:6] = s * np.eye(3)
    neg_w = -skew(vec3(w))
    for i in range(3):
        A[3:6, 6 + 3 * i : 9 + 3 * i] = hat_A(a, i)
        A[6 + 3 * i : 9 + 3 * i, 6 + 3 * i : 9 + 3 * i] = neg_w
    return A


def exp_A_closed(s: float, a, theta) -> np.ndarray:
    """Closed form of ``expm(build_A(s, a, theta))``."""
    theta = vec3(theta)
    L = mat_Lambda(-theta)
    G = mat_Gamma(-theta)
    E = mat_E(-theta)
    out = np.eye(15)
    out[0:3, 3:6] = s * np.eye(3)
    for i in range(3):
        cols = slice(6 + 3 * i, 9 + 3 * i)
        Ai = hat_A(a, i)
        out[0:3, cols] = s * (Ai @ L)
        out[3:6, cols] = Ai @ G
        out[cols, cols] = E
    return out


def exp_A_series(A: np.ndarray, terms: int = SERIES_TERMS) -> np.ndarray:
    """Naive power series ``sum_{k=0}^{terms} A^k / k!``."""
    if terms < 1:
        raise ValueError("terms must be >= 1")
    A = np.asarray(A, dtype=float)
    out = np.eye(A.shape[0])
    power = np.eye(A.shape[0])
    for k in range(1, terms + 1):
        power = power @ A
        out += power / math.factorial(k)
    return out


def lift(state: NavState) -> np.ndarray:
    # columns of R_WB are the rows of R_BW
    return np.concatenate([state.p, state.v, state.R.reshape(9)])


def unlift(x: np.ndarray, t: float) -> NavState:
    x = np.asarray(x, dtype=float).reshape(15)
    return NavState(t, x[0:3], x[3:6], x[6:15].reshape(3, 3))


def propagate_lifted(x: np.ndarray, dt: float, a, w, g) -> np.ndarray:
    """One zero-order-hold step of the lifted linear system."""
    x = np.asarray(x, dtype=float).reshape(15)
    a, w, g = vec3(a), vec3(w), vec3(g)
    if not (np.isfinite(dt) and np.all(np.isfinite(x)) and np.all(np.isfinite(a))
            and np.all(np.isfinite(w)) and np.all(np.isfinite(g))):
        raise ValueError("non-finite input to propagate_lifted")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    b = np.zeros(15)
    b[0:3] = 0.5 * dt * dt * g
    b[3:6] = dt * g
    return exp_A_closed(dt, dt * a, w * dt) @ x + b
