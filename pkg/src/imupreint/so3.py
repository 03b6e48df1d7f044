"""Skew algebra and the rotation-series matrices E, Gamma and Lambda.

For a rotation vector ``theta`` with ``K = skew(theta)``:

    E(theta)      = sum_k K^k / k!        (the SO(3) exponential)
    Gamma(theta)  = sum_k K^k / (k+1)!
    Lambda(theta) = sum_k K^k / (k+2)!

Each collapses to ``c0*I + c1*K + c2*K^2`` because ``K^3 = -|theta|^2 K``.
Gamma and Lambda are the first and second time integrals of E and map a
body-frame acceleration held over one sample into the exact velocity and
position increments.
"""
from __future__ import annotations

import math

import numpy as np

# Below this angle the coefficients come from truncated Taylor series.
SMALL_ANGLE = 1e-4

_I3 = np.eye(3)


def skew(w) -> np.ndarray:
    """Return the 3x3 antisymmetric matrix with ``skew(w) @ v == cross(w, v)``."""
    x, y, z = w
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def h_functions(z: float) -> tuple[float, float, float, float]:
    """The scalar functions h1..h4 from the coefficient table, evaluated literally."""
    s, c = math.sin(z), math.cos(z)
    return s, 1.0 - c, z - s, 2.0 * c - 2.0 + z * z


def _z_minus_sin(z: float) -> float:
    # z - sin z cancels badly below z ~ 1; sum its alternating series instead
    if z >= 1.0:
        return z - math.sin(z)
    z2 = z * z
    term = z * z2 / 6.0
    total = 0.0
    for n in range(2, 12):
        total += term
        term *= -z2 / ((2 * n) * (2 * n + 1))
    return total


def _taylor_coefficients(z: float) -> tuple[float, float, float, float]:
    z2 = z * z
    return 1.0 - z2 / 6.0, 0.5 - z2 / 24.0, 1.0 / 6.0 - z2 / 120.0, 1.0 / 24.0 - z2 / 720.0


def _closed_coefficients(z: float) -> tuple[float, float, float, float]:
    # 1-cos z and 2cos z-2+z^2 rewritten to avoid cancellation for small z
    half_sin = math.sin(0.5 * z)
    z2 = z * z
    c1 = math.sin(z) / z
    c2 = 2.0 * half_sin * half_sin / z2
    c3 = _z_minus_sin(z) / (z2 * z)
    c4 = _z_minus_sin(0.5 * z) * (z + 2.0 * half_sin) / (z2 * z2)
    return c1, c2, c3, c4


def _coefficients(z: float) -> tuple[float, float, float, float]:
    """h1/z, h2/z^2, h3/z^3 and h4/(2 z^4), safe at and near zero."""
    if z < SMALL_ANGLE:
        return _taylor_coefficients(z)
    return _closed_coefficients(z)


def _skew_and_square(theta) -> tuple[np.ndarray, np.ndarray, float]:
    theta = np.asarray(theta, dtype=float)
    K = skew(theta)
    z2 = float(theta @ theta)
    K2 = np.outer(theta, theta) - z2 * _I3
    return K, K2, math.sqrt(z2)


def mat_E(theta) -> np.ndarray:
    """Rotation matrix ``exp(skew(theta))`` (Rodrigues form)."""
    K, K2, z = _skew_and_square(theta)
    c1, c2, _, _ = _coefficients(z)
    return _I3 + c1 * K + c2 * K2


def mat_Gamma(theta) -> np.ndarray:
    K, K2, z = _skew_and_square(theta)
    _, c2, c3, _ = _coefficients(z)
    return _I3 + c2 * K + c3 * K2


def mat_Lambda(theta) -> np.ndarray:
    K, K2, z = _skew_and_square(theta)
    _, _, c3, c4 = _coefficients(z)
    return 0.5 * _I3 + c3 * K + c4 * K2


def series_matrices(theta) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """E, Gamma and Lambda of one rotation vector, sharing the skew products."""
    K, K2, z = _skew_and_square(theta)
    c1, c2, c3, c4 = _coefficients(z)
    E = _I3 + c1 * K + c2 * K2
    G = _I3 + c2 * K + c3 * K2
    L = 0.5 * _I3 + c3 * K + c4 * K2
    return E, G, L


def skew_series(theta, shift: int, terms: int = 30) -> np.ndarray:
    """Truncated series ``sum_{k<terms} skew(theta)^k / (k+shift)!``.

    ``shift`` 0, 1, 2 give E, Gamma, Lambda. Plain power summation with no
    use of the closed forms, so it serves as an independent check on them.
    """
    K = skew(theta)
    out = np.zeros((3, 3))
    power = np.eye(3)
    for k in range(terms):
        out += power / math.factorial(k + shift)
        power = power @ K
    return out


def orthonormality_residual(R: np.ndarray) -> float:
    """Largest entry of ``|R^T R - I|``."""
    return float(np.max(np.abs(R.T @ R - _I3)))


def is_rotation(R, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return orthonormality_residual(R) <= tol and abs(np.linalg.det(R) - 1.0) <= tol


def project_to_rotation(R: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix in the Frobenius sense (SVD projection)."""
    U, _, Vt = np.linalg.svd(R)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt
