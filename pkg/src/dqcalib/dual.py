"""Dual numbers, dual quaternions and rigid poses.

Dual numbers are totally ordered lexicographically (standard part first),
which is what makes the calibration objectives below comparable: a
residual ``r`` is better than ``s`` when ``r < s`` as dual numbers.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from dqcalib import quat as Q
from dqcalib.errors import NonUnitDualQuaternion

UNIT_TOL = 1e-8
# below this a standard part counts as zero (exact-arithmetic branch cutoff)
ZERO_TOL = 1e-12


@functools.total_ordering
@dataclass(frozen=True)
class DualNumber:
    """``standard + infinitesimal * eps`` with ``eps**2 == 0``."""

    standard: float
    infinitesimal: float = 0.0

    def __add__(self, other: DualNumber) -> DualNumber:
        other = _as_dual(other)
        return DualNumber(self.standard + other.standard, self.infinitesimal + other.infinitesimal)

    __radd__ = __add__

    def __neg__(self) -> DualNumber:
        return DualNumber(-self.standard, -self.infinitesimal)

    def __sub__(self, other: DualNumber) -> DualNumber:
        return self + (-_as_dual(other))

    def __mul__(self, other: DualNumber) -> DualNumber:
        other = _as_dual(other)
        return DualNumber(
            self.standard * other.standard,
            self.standard * other.infinitesimal + self.infinitesimal * other.standard,
        )

    __rmul__ = __mul__

    def __abs__(self) -> DualNumber:
        return dn_abs(self)

    def __eq__(self, other) -> bool:
        try:
            other = _as_dual(other)
        except TypeError:
            return NotImplemented
        return self.standard == other.standard and self.infinitesimal == other.infinitesimal

    def __lt__(self, other) -> bool:
        return dn_compare(self, _as_dual(other)) < 0

    def __hash__(self) -> int:
        return hash((self.standard, self.infinitesimal))


def _as_dual(x) -> DualNumber:
    if isinstance(x, DualNumber):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return DualNumber(float(x), 0.0)
    raise TypeError(f"cannot interpret {type(x).__name__} as a dual number")


def dn_compare(p: DualNumber, q: DualNumber) -> int:
    """Three-way comparison under the lexicographic total order (-1, 0 or 1)."""
    p, q = _as_dual(p), _as_dual(q)
    if p.standard != q.standard:
        return -1 if p.standard < q.standard else 1
    if p.infinitesimal != q.infinitesimal:
        return -1 if p.infinitesimal < q.infinitesimal else 1
    return 0


def dn_abs(q: DualNumber) -> DualNumber:
    if q.standard != 0.0:
        s = 1.0 if q.standard > 0 else -1.0
        return DualNumber(abs(q.standard), s * q.infinitesimal)
    return DualNumber(0.0, abs(q.infinitesimal))


@dataclass(frozen=True, eq=False)
class DualQuaternion:
    """``st + im * eps`` with quaternion coefficients stored as 4-vectors."""

    st: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "st", np.asarray(self.st, dtype=float).reshape(4))
        object.__setattr__(self, "im", np.asarray(self.im, dtype=float).reshape(4))

    def __mul__(self, other: DualQuaternion) -> DualQuaternion:
        return dq_multiply(self, other)

    def __add__(self, other: DualQuaternion) -> DualQuaternion:
        return DualQuaternion(self.st + other.st, self.im + other.im)

    def __sub__(self, other: DualQuaternion) -> DualQuaternion:
        return DualQuaternion(self.st - other.st, self.im - other.im)

    def __neg__(self) -> DualQuaternion:
        return DualQuaternion(-self.st, -self.im)

    def conjugate(self) -> DualQuaternion:
        return DualQuaternion(Q.conjugate(self.st), Q.conjugate(self.im))

    def magnitude(self) -> DualNumber:
        return dq_magnitude(self)

    def allclose(self, other: DualQuaternion, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.st, other.st, atol=atol, rtol=0)
                    and np.allclose(self.im, other.im, atol=atol, rtol=0))

    def __repr__(self) -> str:
        return f"DualQuaternion(st={self.st.tolist()}, im={self.im.tolist()})"


IDENTITY = DualQuaternion(Q.ONE, np.zeros(4))


def dq_multiply(p: DualQuaternion, q: DualQuaternion) -> DualQuaternion:
    return DualQuaternion(
        Q.multiply(p.st, q.st),
        Q.multiply(p.st, q.im) + Q.multiply(p.im, q.st),
    )


def dq_magnitude(q: DualQuaternion) -> DualNumber:
    n = Q.magnitude(q.st)
    if n > ZERO_TOL:
        return DualNumber(n, float(q.st @ q.im) / n)
    return DualNumber(0.0, Q.magnitude(q.im))


def is_unit(q: DualQuaternion, tol: float = UNIT_TOL) -> bool:
    """Both unit conditions: ``|st| = 1`` and ``Sc(st* im) = 0``."""
    return abs(Q.magnitude(q.st) - 1.0) <= tol and abs(float(q.st @ q.im)) <= tol


def check_unit(q: DualQuaternion, tol: float = UNIT_TOL) -> DualQuaternion:
    if not is_unit(q, tol):
        raise NonUnitDualQuaternion(
            f"|st| = {Q.magnitude(q.st):.3e}, Sc(st* im) = {float(q.st @ q.im):.3e}"
        )
    return q


def canonicalize(q: DualQuaternion) -> DualQuaternion:
    """Representative of ``{q, -q}`` fixed by the sign rule on the standard part."""
    return q if np.array_equal(Q.canonicalize(q.st), q.st) else -q


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform ``x -> R x + t``."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float).reshape(3, 3))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float).reshape(3))

    @classmethod
    def identity(cls) -> Pose:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, T) -> Pose:
        T = np.asarray(T, dtype=float)
        if T.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {T.shape}")
        return cls(T[:3, :3], T[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.R
        T[:3, 3] = self.t
        return T

    def inverse(self) -> Pose:
        return Pose(self.R.T, -self.R.T @ self.t)

    def __matmul__(self, other: Pose) -> Pose:
        return Pose(self.R @ other.R, self.R @ other.t + self.t)

    def __repr__(self) -> str:
        return f"Pose(R={self.R.tolist()}, t={self.t.tolist()})"


def pose_to_dq(T: Pose) -> DualQuaternion:
    """Unit dual quaternion ``q_st + (t q_st / 2) eps`` of a pose.

    Raises:
        NotARotation: if ``T.R`` is not a rotation.
    """
    st = Q.rotation_to_quat(T.R)
    im = 0.5 * Q.multiply(np.concatenate([[0.0], T.t]), st)
    return DualQuaternion(st, im)


def dq_to_pose(q: DualQuaternion, tol: float = UNIT_TOL) -> Pose:
    """Pose of a unit dual quaternion; ``(0, t) = 2 im st*``.

    Raises:
        NonUnitDualQuaternion: if ``q`` fails the unit conditions within ``tol``.
    """
    check_unit(q, tol)
    t = 2.0 * Q.multiply(q.im, Q.conjugate(q.st))
    return Pose(Q.quat_to_rotation(q.st, tol), t[1:])


def dqvec_norm(v: Sequence[DualQuaternion]) -> DualNumber:
    """2-norm of a dual-quaternion vector.

    ``||v_st|| + Sc(v_st* v_im) / ||v_st|| eps`` when the standard part is
    nonzero, else ``||v_im|| eps``.
    """
    st = np.array([e.st for e in v]).reshape(-1, 4)
    im = np.array([e.im for e in v]).reshape(-1, 4)
    n = float(np.linalg.norm(st))
    if n > ZERO_TOL:
        return DualNumber(n, float(np.sum(st * im)) / n)
    return DualNumber(0.0, float(np.linalg.norm(im)))


def residual_axxb(motions, x: DualQuaternion) -> DualNumber:
    """``||a x - x b||`` over all motion pairs."""
    return dqvec_norm([a * x - x * b for a, b in motions.pairs])


def residual_axzb(measurements, x: DualQuaternion, z: DualQuaternion) -> DualNumber:
    """``||a x - z b||`` over all measurement pairs."""
    return dqvec_norm([a * x - z * b for a, b in measurements.pairs])


class PairSet:
    """Ordered pairs ``(a_i, b_i)`` of unit dual quaternions.

    The stacked parts are kept as ``(n, 4)`` arrays (``a_st``, ``a_im``,
    ``b_st``, ``b_im``) for the matrix builders.
    """

    min_pairs = 1

    def __init__(self, pairs, tol: float = UNIT_TOL):
        pairs = [(a, b) for a, b in pairs]
        if len(pairs) < self.min_pairs:
            raise ValueError(f"{type(self).__name__} needs at least {self.min_pairs} pair(s)")
        for a, b in pairs:
            check_unit(a, tol)
            check_unit(b, tol)
        self.pairs = tuple(pairs)
        self.a_st = np.array([a.st for a, _ in pairs])
        self.a_im = np.array([a.im for a, _ in pairs])
        self.b_st = np.array([b.st for _, b in pairs])
        self.b_im = np.array([b.im for _, b in pairs])

    @classmethod
    def from_poses(cls, pairs, tol: float = UNIT_TOL):
        return cls([(pose_to_dq(A), pose_to_dq(B)) for A, B in pairs], tol)

    def _flipped(self, signs) -> "PairSet":
        new = type(self).__new__(type(self))
        new.pairs = tuple((a, b if s > 0 else -b) for (a, b), s in zip(self.pairs, signs))
        new.a_st, new.a_im = self.a_st, self.a_im
        new.b_st = self.b_st * np.asarray(signs, dtype=float)[:, None]
        new.b_im = self.b_im * np.asarray(signs, dtype=float)[:, None]
        return new

    def poses(self) -> list[tuple[Pose, Pose]]:
        return [(dq_to_pose(a), dq_to_pose(b)) for a, b in self.pairs]

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={len(self)})"
