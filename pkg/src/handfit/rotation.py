"""Axis-angle rotation utilities.

Conventions
-----------
- An axis-angle vector ``w`` is a 3-vector whose direction is the rotation
  axis and whose magnitude is the angle in radians.
- Rotation matrices act on column vectors: ``x' = R @ x``.
- Derivatives use the exact closed form of d(exp[w]x)/dw with a second-order
  Taylor branch below ``SMALL_ANGLE`` to avoid the 0/0 in sin(phi)/phi.
"""

import numpy as np

SMALL_ANGLE = 1e-8

_EYE3 = np.eye(3)


def skew(v: np.ndarray) -> np.ndarray:
    """3x3 cross-product matrix of a 3-vector: skew(v) @ x == cross(v, x)."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def rodrigues(axis_angle: np.ndarray) -> np.ndarray:
    """Axis-angle 3-vector to a proper 3x3 rotation matrix.

    R = I + sin(phi)/phi * K + (1-cos(phi))/phi^2 * K^2 with K = skew(w).
    Below SMALL_ANGLE the two coefficients use their Taylor expansions.
    """
    w = np.asarray(axis_angle, dtype=float)
    if w.shape != (3,):
        raise ValueError(f"axis-angle must be a 3-vector, got shape {w.shape}")
    phi2 = float(w @ w)
    if phi2 < SMALL_ANGLE * SMALL_ANGLE:
        a = 1.0 - phi2 / 6.0
        b = 0.5 - phi2 / 24.0
    else:
        phi = np.sqrt(phi2)
        a = np.sin(phi) / phi
        b = (1.0 - np.cos(phi)) / phi2
    k = skew(w)
    return _EYE3 + a * k + b * (k @ k)


def rodrigues_jacobian(axis_angle: np.ndarray) -> np.ndarray:
    """Derivative of rodrigues(w) w.r.t. w.

    Returns a (3, 3, 3) tensor J with J[i] = dR/dw_i, using the closed form

        dR/dw_i = (w_i K + skew(w x ((I - R) e_i))) / |w|^2 @ R

    and, below SMALL_ANGLE, the derivative of the second-order expansion
    R ~ I + K + K^2/2, i.e. dR/dw_i ~ skew(e_i) + (skew(e_i) K + K skew(e_i))/2.
    """
    w = np.asarray(axis_angle, dtype=float)
    phi2 = float(w @ w)
    k = skew(w)
    out = np.empty((3, 3, 3))
    if phi2 < SMALL_ANGLE * SMALL_ANGLE:
        for i in range(3):
            ei = skew(_EYE3[i])
            out[i] = ei + 0.5 * (ei @ k + k @ ei)
        return out
    r = rodrigues(w)
    imr = _EYE3 - r
    for i in range(3):
        v = np.cross(w, imr[:, i])
        out[i] = ((w[i] * k + skew(v)) / phi2) @ r
    return out


def quaternion_to_axis_angle(q: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) to an axis-angle 3-vector."""
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q)
    if q[0] < 0.0:  # keep the short rotation (angle in [0, pi])
        q = -q
    sin_half = np.linalg.norm(q[1:])
    if sin_half < SMALL_ANGLE:
        return 2.0 * q[1:]
    angle = 2.0 * np.arctan2(sin_half, q[0])
    return q[1:] / sin_half * angle
