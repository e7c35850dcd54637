"""Quaternion arithmetic on 4-vectors.

A quaternion ``q0 + q1 i + q2 j + q3 k`` is stored as a float array
``[q0, q1, q2, q3]`` (scalar first). All functions are pure and return
new arrays.
"""

from __future__ import annotations

import numpy as np

from dqcalib.errors import NonUnitQuaternion, NotARotation

Quaternion = np.ndarray

ONE = np.array([1.0, 0.0, 0.0, 0.0])


def quat(q0: float, q1: float = 0.0, q2: float = 0.0, q3: float = 0.0) -> Quaternion:
    return np.array([q0, q1, q2, q3], dtype=float)


def multiply(a: Quaternion, b: Quaternion) -> Quaternion:
    """Hamilton product ``a b``."""
    a0, a1, a2, a3 = a
    b0, b1, b2, b3 = b
    return np.array([
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
        a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
        a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
        a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
    ])


def conjugate(a: Quaternion) -> Quaternion:
    return np.array([a[0], -a[1], -a[2], -a[3]], dtype=float)


def scalar_part(a: Quaternion) -> float:
    return float(a[0])


def magnitude(a: Quaternion) -> float:
    return float(np.linalg.norm(a))


def left_matrix(a: Quaternion) -> np.ndarray:
    """Matrix ``M(a)`` with ``M(a) @ b == multiply(a, b)`` for 4-vectors."""
    a0, a1, a2, a3 = a
    return np.array([
        [a0, -a1, -a2, -a3],
        [a1, a0, -a3, a2],
        [a2, a3, a0, -a1],
        [a3, -a2, a1, a0],
    ], dtype=float)


def right_matrix(a: Quaternion) -> np.ndarray:
    """Matrix ``W(a)`` with ``W(a) @ b == multiply(b, a)`` for 4-vectors."""
    a0, a1, a2, a3 = a
    return np.array([
        [a0, -a1, -a2, -a3],
        [a1, a0, a3, -a2],
        [a2, -a3, a0, a1],
        [a3, a2, -a1, a0],
    ], dtype=float)


def left_matrices(A: np.ndarray) -> np.ndarray:
    """Stacked ``M(a)`` for every row of an ``(n, 4)`` array."""
    a0, a1, a2, a3 = np.asarray(A, dtype=float).T
    return np.stack([
        np.stack([a0, -a1, -a2, -a3], -1),
        np.stack([a1, a0, -a3, a2], -1),
        np.stack([a2, a3, a0, -a1], -1),
        np.stack([a3, -a2, a1, a0], -1),
    ], -2)


def right_matrices(A: np.ndarray) -> np.ndarray:
    """Stacked ``W(a)`` for every row of an ``(n, 4)`` array."""
    a0, a1, a2, a3 = np.asarray(A, dtype=float).T
    return np.stack([
        np.stack([a0, -a1, -a2, -a3], -1),
        np.stack([a1, a0, a3, -a2], -1),
        np.stack([a2, -a3, a0, a1], -1),
        np.stack([a3, a2, -a1, a0], -1),
    ], -2)


def canonicalize(q: Quaternion) -> Quaternion:
    """Pick the representative of ``{q, -q}`` whose first nonzero entry is positive."""
    q = np.asarray(q, dtype=float)
    for c in q:
        if c != 0.0:
            return q.copy() if c > 0 else -q
    return q.copy()


def quat_to_rotation(q: Quaternion, tol: float = 1e-8) -> np.ndarray:
    """Rotation matrix of a unit quaternion.

    Raises:
        NonUnitQuaternion: if ``| |q| - 1 | > tol``.
    """
    if abs(magnitude(q) - 1.0) > tol:
        raise NonUnitQuaternion(f"|q| = {magnitude(q):.3e}, expected 1")
    q0, q1, q2, q3 = q
    return np.array([
        [q0 * q0 + q1 * q1 - q2 * q2 - q3 * q3, 2 * (q1 * q2 - q0 * q3), 2 * (q1 * q3 + q0 * q2)],
        [2 * (q1 * q2 + q0 * q3), q0 * q0 - q1 * q1 + q2 * q2 - q3 * q3, 2 * (q2 * q3 - q0 * q1)],
        [2 * (q1 * q3 - q0 * q2), 2 * (q2 * q3 + q0 * q1), q0 * q0 - q1 * q1 - q2 * q2 + q3 * q3],
    ])


def is_rotation(R: np.ndarray, tol: float = 1e-6) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return bool(np.abs(R.T @ R - np.eye(3)).max() <= tol and abs(np.linalg.det(R) - 1.0) <= tol)


def rotation_to_quat(R: np.ndarray, tol: float = 1e-6) -> Quaternion:
    """Unit quaternion of a rotation matrix, sign-canonicalized.

    Uses the branch on the largest of ``trace, R00, R11, R22`` so the
    divisor never gets small (stable near half-turns).

    Raises:
        NotARotation: if ``R`` is not orthonormal with det 1 within ``tol``.
    """
    R = np.asarray(R, dtype=float)
    if not is_rotation(R, tol):
        raise NotARotation("matrix is not a proper rotation")
    tr = np.trace(R)
    d = np.array([tr, R[0, 0], R[1, 1], R[2, 2]])
    i = int(np.argmax(d))
    if i == 0:
        s = 2.0 * np.sqrt(1.0 + tr)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif i == 1:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif i == 2:
        s = 2.0 * np.sqrt(1.0 - R[0, 0] + R[1, 1] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 - R[0, 0] - R[1, 1] + R[2, 2])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    return canonicalize(q / np.linalg.norm(q))


def nearest_rotation(M: np.ndarray) -> np.ndarray:
    """Closest proper rotation to ``M`` in Frobenius norm (polar projection)."""
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt)) or 1.0])
    return U @ D @ Vt


def axis_angle(axis, angle: float) -> Quaternion:
    """Unit quaternion rotating by ``angle`` about ``axis``."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    return np.concatenate([[np.cos(angle / 2)], np.sin(angle / 2) * n])


def random_unit(rng: np.random.Generator) -> Quaternion:
    q = rng.standard_normal(4)
    return q / np.linalg.norm(q)
