"""SO(3) and spatial-algebra primitives shared by the plant, grasp maps and controller.

Conventions: vectors are length-3 float arrays, rotations are 3x3 orthonormal
matrices mapping body coordinates to world coordinates, unit quaternions are
length-4 arrays ordered (w, x, y, z) with w >= 0 so the rotation-vector
extraction is single-valued. Wrenches and twists are length-6 arrays with the
linear part first.
"""

from __future__ import annotations

import numpy as np

_EYE3 = np.eye(3)


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix: skew(v) @ w == np.cross(v, w)."""
    x, y, z = v
    return np.array([
        [0.0, -z, y],
        [z, 0.0, -x],
        [-y, x, 0.0],
    ])


def vee(m: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Inverse of skew. Rejects matrices that are not antisymmetric within tol."""
    asym = np.linalg.norm(m + m.T)
    if asym > tol * max(1.0, np.linalg.norm(m)):
        raise ValueError(f"matrix is not antisymmetric (|M + M^T| = {asym:.3e})")
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def rot_to_quat(r: np.ndarray) -> np.ndarray:
    """Rotation matrix to unit quaternion (w, x, y, z), scalar part >= 0.

    Uses the largest-pivot branch so the result is stable for any attitude,
    including half-turns where the scalar part vanishes.
    """
    t = np.trace(r)
    if t > r[0, 0] and t > r[1, 1] and t > r[2, 2]:
        u = 1.0 + t
        q = np.array([u, r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    elif r[0, 0] >= r[1, 1] and r[0, 0] >= r[2, 2]:
        u = 1.0 + r[0, 0] - r[1, 1] - r[2, 2]
        q = np.array([r[2, 1] - r[1, 2], u, r[0, 1] + r[1, 0], r[0, 2] + r[2, 0]])
    elif r[1, 1] >= r[2, 2]:
        u = 1.0 + r[1, 1] - r[0, 0] - r[2, 2]
        q = np.array([r[0, 2] - r[2, 0], r[0, 1] + r[1, 0], u, r[1, 2] + r[2, 1]])
    else:
        u = 1.0 + r[2, 2] - r[0, 0] - r[1, 1]
        q = np.array([r[1, 0] - r[0, 1], r[0, 2] + r[2, 0], r[1, 2] + r[2, 1], u])
    q = q / np.linalg.norm(q)
    if q[0] < 0.0:
        q = -q
    elif q[0] == 0.0:
        # Half turn: pick the representative whose first nonzero component is positive.
        for c in q[1:]:
            if c != 0.0:
                if c < 0.0:
                    q = -q
                break
    return q


def quat_to_rot(q: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) to rotation matrix."""
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def rot_to_angle_vector(r: np.ndarray) -> np.ndarray:
    """Rotation matrix -> rotation vector (axis * angle), angle in [0, pi].

    Routes through the quaternion so attitudes near a half turn stay
    well-conditioned.
    """
    q = rot_to_quat(r)
    w = q[0]
    s = np.linalg.norm(q[1:])
    if s < 1e-9:
        # angle ~ 2 s / w; series keeps the map smooth through the identity
        return (2.0 / w) * q[1:] * (1.0 - s * s / (3.0 * w * w))
    angle = 2.0 * np.arctan2(s, w)
    return (angle / s) * q[1:]


def angle_vector_to_rot(theta: np.ndarray) -> np.ndarray:
    """Rotation vector -> rotation matrix (Rodrigues formula)."""
    angle = np.linalg.norm(theta)
    k = skew(theta)
    if angle < 1e-8:
        return _EYE3 + k + 0.5 * (k @ k)
    a = np.sin(angle) / angle
    b = (1.0 - np.cos(angle)) / (angle * angle)
    return _EYE3 + a * k + b * (k @ k)


def orthonormalize(r: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix (polar decomposition via SVD)."""
    u, _, vt = np.linalg.svd(r)
    out = u @ vt
    if np.linalg.det(out) < 0.0:
        u = u.copy()
        u[:, -1] = -u[:, -1]
        out = u @ vt
    return out


def integrate_rotation(r: np.ndarray, omega_body: np.ndarray, dt: float) -> np.ndarray:
    """Advance a rotation by a body-frame rate held constant over dt.

    Returns the re-orthonormalized R @ exp(skew(omega_body * dt)). For a
    world-frame rate w use omega_body = R.T @ w.
    """
    return orthonormalize(r @ angle_vector_to_rot(np.asarray(omega_body) * dt))


def is_rotation(r: np.ndarray, tol: float = 1e-9) -> bool:
    return (
        np.linalg.norm(r @ r.T - _EYE3) <= tol
        and abs(np.linalg.det(r) - 1.0) <= tol
    )


def parallel_axis(i_cm: np.ndarray, m: float, d: np.ndarray) -> np.ndarray:
    """Inertia about a point offset by d from the center of mass.

    i_cm is the (symmetric positive definite) inertia about the center of
    mass; m the body mass in kg; d the offset in the same frame as i_cm.
    """
    if m <= 0.0:
        raise ValueError("m > 0 required")
    if np.linalg.norm(i_cm - i_cm.T) > 1e-9 * max(1.0, np.linalg.norm(i_cm)):
        raise ValueError("inertia matrix must be symmetric")
    d = np.asarray(d, dtype=float)
    return i_cm + m * (float(d @ d) * _EYE3 - np.outer(d, d))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed random rotation (via a random unit quaternion)."""
    q = rng.standard_normal(4)
    return quat_to_rot(q / np.linalg.norm(q))
