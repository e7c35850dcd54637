"""Hand-eye calibration ``A X = X B`` by regularization and patching.

Pipeline:

1. Build ``L11, L22, L12`` from the motion pairs. For a unit dual
   quaternion ``x`` the standard residual is ``x_st^T L11 x_st`` and the
   infinitesimal one is ``x_im^T L11 x_im + 2 x_im^T L12 x_st + x_st^T L22 x_st``.
2. The rotation part minimizes ``x_st^T L11 x_st``: take the smallest
   eigenvalue ``lambda0`` of ``L11`` and an orthonormal basis ``Q`` of its
   eigenspace (dimension ``k``).
3. ``lambda0 == 0`` (within tolerance): the data are rotationwise
   noiseless, and every ``Q y`` fits the rotations exactly. Pick ``y`` and
   ``x_im`` by minimizing the infinitesimal residual plus
   ``gamma * |x_im|^2`` (smallest translation among the exact fits).
4. Otherwise pick ``x_st = Q y`` with ``y`` the eigenvector of the smallest
   eigenvalue of ``Sym(Q^T L12 Q)``, then patch ``x_im`` by minimizing the
   infinitesimal residual subject to ``x_st ^T x_im = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dqcalib import quat as Q
from dqcalib.dual import (
    DualNumber,
    DualQuaternion,
    PairSet,
    Pose,
    canonicalize,
    dq_to_pose,
    residual_axxb,
)
from dqcalib.spectral import (
    CLUSTER_TOL,
    EqConstrainedQP,
    SpectralBasis,
    SphereCoupledProblem,
    solve_eq_qp,
    solve_sphere_coupled,
    sym_extremal_eig,
)

GAMMA = 2e-6
TOL_NOISELESS = 1e-8


class MotionSet(PairSet):
    """Relative motions ``(a_i, b_i)`` with ``a_i x = x b_i``."""

    def aligned(self) -> MotionSet:
        """Flip each ``b_i`` so that ``a_i x = x b_i`` rather than ``-x b_i``.

        A pose fixes its dual quaternion only up to sign. Conjugate motions
        share their scalar parts (``Sc(a) = Sc(x b x*) = Sc(b)``), which
        picks the sign; for half-turns the dual scalar parts decide.
        """
        signs = []
        for (a, b) in self.pairs:
            p = a.st[0] * b.st[0]
            if abs(a.st[0]) < 1e-6 and abs(b.st[0]) < 1e-6:
                p = a.im[0] * b.im[0]
            signs.append(-1.0 if p < 0 else 1.0)
        return self._flipped(signs)


@dataclass(frozen=True, eq=False)
class AxxbMatrices:
    L11: np.ndarray
    L22: np.ndarray
    L12: np.ndarray


@dataclass(frozen=True, eq=False)
class AxxbSolution:
    x: DualQuaternion
    branch: str
    lambda0: float
    multiplicity: int
    residual: DualNumber
    gamma: float

    @property
    def pose(self) -> Pose:
        return dq_to_pose(self.x)

    @property
    def X(self) -> np.ndarray:
        return self.pose.matrix


def build_matrices(m: MotionSet) -> AxxbMatrices:
    Ms = Q.left_matrices(m.a_st) - Q.right_matrices(m.b_st)
    Mi = Q.left_matrices(m.a_im) - Q.right_matrices(m.b_im)
    L11 = np.einsum("nji,njk->ik", Ms, Ms)
    L22 = np.einsum("nji,njk->ik", Mi, Mi)
    L12 = np.einsum("nji,njk->ik", Ms, Mi)
    return AxxbMatrices(0.5 * (L11 + L11.T), 0.5 * (L22 + L22.T), L12)


def rotation_stage(L: AxxbMatrices, n: int, tol_noiseless: float = TOL_NOISELESS,
                   cluster_tol: float = CLUSTER_TOL) -> tuple[SpectralBasis, bool]:
    """Smallest eigenpair of ``L11`` and whether the data are rotationwise noiseless."""
    basis = sym_extremal_eig(L.L11, "min", cluster_tol)
    return basis, basis.value <= tol_noiseless * n


def solve_noiseless(L: AxxbMatrices, basis: SpectralBasis, gamma: float = GAMMA):
    """Regularized branch; returns ``(x_st, x_im)``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    Qb = basis.basis
    problem = SphereCoupledProblem(
        H=L.L11 + gamma * np.eye(4),
        G=L.L12 @ Qb,
        D=[Qb],
        P=Qb.T @ (L.L22 + gamma * np.eye(4)) @ Qb,
    )
    sol = solve_sphere_coupled(problem)
    return Qb @ sol.y, sol.inner


def solve_noisy(L: AxxbMatrices, basis: SpectralBasis):
    """Patching branch; returns ``(x_st, x_im)``."""
    Qb = basis.basis
    S = Qb.T @ L.L12 @ Qb
    y = sym_extremal_eig(0.5 * (S + S.T), "min").basis[:, 0]
    x_st = Qb @ y
    x_st /= np.linalg.norm(x_st)
    x_im = solve_eq_qp(EqConstrainedQP(L.L11, L.L12 @ x_st, x_st[None, :]))
    return x_st, x_im


def solve(m: MotionSet, gamma: float = GAMMA, tol_noiseless: float = TOL_NOISELESS,
          cluster_tol: float = CLUSTER_TOL) -> AxxbSolution:
    """Solve ``A X = X B`` for the motion set ``m`` (signs aligned first)."""
    m = m.aligned()
    L = build_matrices(m)
    basis, noiseless = rotation_stage(L, len(m), tol_noiseless, cluster_tol)
    if noiseless:
        x_st, x_im = solve_noiseless(L, basis, gamma)
    else:
        x_st, x_im = solve_noisy(L, basis)
    x_st = x_st / np.linalg.norm(x_st)
    x_im = x_im - (x_st @ x_im) * x_st
    x = canonicalize(DualQuaternion(x_st, x_im))
    return AxxbSolution(
        x=x,
        branch="noiseless" if noiseless else "noisy",
        lambda0=basis.value,
        multiplicity=basis.multiplicity,
        residual=residual_axxb(m, x),
        gamma=gamma,
    )
