"""Robot-world hand-eye calibration ``A X = Z B``.

Same two-stage scheme as :mod:`dqcalib.axxb`, with the rotation stage an
SVD: ``|a_st x_st - z_st b_st|^2`` summed over the measurements equals
``2n - 2 x_st^T K11 z_st``, so the best rotations are the top singular
vector pairs ``(Q1 y, Q2 y)`` of ``K11``, and the system is rotationwise
noiseless exactly when ``sigma1 == n``.
"""

from __future__ import annotations

import warnings
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
    residual_axzb,
)
from dqcalib.spectral import (
    CLUSTER_TOL,
    EqConstrainedQP,
    SpectralBasis,
    SphereCoupledProblem,
    solve_eq_qp,
    solve_sphere_coupled,
    svd4,
    sym_extremal_eig,
)

GAMMA = 2e-6
TOL_NOISELESS = 1e-8


class MeasurementSet(PairSet):
    """Absolute measurements ``(a_i, b_i)`` with ``a_i x = z b_i``."""

    def aligned(self) -> MeasurementSet:
        """Flip ``b_i`` signs so that every pair satisfies ``a_i x = z b_i`` with one sign.

        For two measurements, ``a_j* a_i = x (s b_j* b_i) x*`` where ``s`` is
        the relative sign, so ``Sc(a_j* a_i) = s Sc(b_j* b_i)``. Signs are
        propagated from the first measurement, always through the already
        aligned reference with the largest ``|Sc(a_j* a_i)|``.
        """
        n = len(self)
        A, B = self.a_st, self.b_st.copy()
        signs = np.ones(n)
        done = [0]
        todo = list(range(1, n))
        SA = A @ A.T
        while todo:
            i, j = max(((i, j) for i in todo for j in done), key=lambda ij: abs(SA[ij[1], ij[0]]))
            s = SA[j, i] * (B[j] @ B[i])
            signs[i] = -1.0 if s < 0 else 1.0
            B[i] *= signs[i]
            done.append(i)
            todo.remove(i)
        return self._flipped(signs)


@dataclass(frozen=True, eq=False)
class AxzbMatrices:
    K11: np.ndarray
    K12: np.ndarray
    K21: np.ndarray


@dataclass(frozen=True, eq=False)
class AxzbSolution:
    x: DualQuaternion
    z: DualQuaternion
    branch: str
    sigma1: float
    multiplicity: int
    residual: DualNumber
    gamma: float

    @property
    def pose_x(self) -> Pose:
        return dq_to_pose(self.x)

    @property
    def pose_z(self) -> Pose:
        return dq_to_pose(self.z)

    @property
    def X(self) -> np.ndarray:
        return self.pose_x.matrix

    @property
    def Z(self) -> np.ndarray:
        return self.pose_z.matrix


def build_matrices(m: MeasurementSet) -> AxzbMatrices:
    Ma_st = Q.left_matrices(m.a_st)
    Ma_im = Q.left_matrices(m.a_im)
    Wb_st = Q.right_matrices(m.b_st)
    Wb_im = Q.right_matrices(m.b_im)
    return AxzbMatrices(
        K11=np.einsum("nji,njk->ik", Ma_st, Wb_st),
        K12=np.einsum("nji,njk->ik", Ma_st, Wb_im),
        K21=np.einsum("nji,njk->ik", Ma_im, Wb_st),
    )


def _blocks(m: MeasurementSet):
    # per-measurement E_i = [M(a_st), -W(b_st)] acting on (x_im, z_im)
    E = np.concatenate([Q.left_matrices(m.a_st), -Q.right_matrices(m.b_st)], axis=2)
    return E, Q.left_matrices(m.a_im), Q.right_matrices(m.b_im)


def rotation_stage(K: AxzbMatrices, n: int, tol_noiseless: float = TOL_NOISELESS,
                   cluster_tol: float = CLUSTER_TOL) -> tuple[SpectralBasis, bool]:
    """Top singular pair basis of ``K11`` and the ``sigma1 == n`` test."""
    _, _, _, top = svd4(K.K11, cluster_tol)
    return top, n - top.value <= tol_noiseless * n


def solve_noiseless(m: MeasurementSet, basis: SpectralBasis, gamma: float = GAMMA):
    """Regularized branch; returns ``(x_st, x_im, z_st, z_im)``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    Q1, Q2 = basis.basis, basis.right
    k = Q1.shape[1]
    E, Ma_im, Wb_im = _blocks(m)
    F = Ma_im @ Q1 - Wb_im @ Q2  # (n, 4, k)
    zeros = np.zeros((4, k))
    problem = SphereCoupledProblem(
        H=np.einsum("nji,njk->ik", E, E) + gamma * np.eye(8),
        G=np.einsum("nji,njk->ik", E, F),
        D=[np.vstack([Q1, zeros]), np.vstack([zeros, Q2])],
        P=np.einsum("nji,njk->ik", F, F) + 2.0 * gamma * np.eye(k),
    )
    sol = solve_sphere_coupled(problem)
    return Q1 @ sol.y, sol.inner[:4], Q2 @ sol.y, sol.inner[4:]


def solve_noisy(m: MeasurementSet, K: AxzbMatrices, basis: SpectralBasis):
    """Patching branch; returns ``(x_st, x_im, z_st, z_im)``."""
    Q1, Q2 = basis.basis, basis.right
    S = Q1.T @ (K.K12 + K.K21) @ Q2
    y = sym_extremal_eig(0.5 * (S + S.T), "max").basis[:, 0]
    x_st, z_st = Q1 @ y, Q2 @ y
    x_st /= np.linalg.norm(x_st)
    z_st /= np.linalg.norm(z_st)
    E, Ma_im, Wb_im = _blocks(m)
    f = Ma_im @ x_st - Wb_im @ z_st  # (n, 4)
    C = np.zeros((2, 8))
    C[0, :4], C[1, 4:] = x_st, z_st
    w = solve_eq_qp(EqConstrainedQP(
        np.einsum("nji,njk->ik", E, E), np.einsum("nji,nj->i", E, f), C))
    return x_st, w[:4], z_st, w[4:]


def solve(m: MeasurementSet, gamma: float = GAMMA, tol_noiseless: float = TOL_NOISELESS,
          cluster_tol: float = CLUSTER_TOL) -> AxzbSolution:
    """Solve ``A X = Z B`` for the measurement set ``m``."""
    m = m.aligned()
    n = len(m)
    if n < 2:
        warnings.warn("a single measurement leaves A X = Z B underdetermined", stacklevel=2)
    K = build_matrices(m)
    basis, noiseless = rotation_stage(K, n, tol_noiseless, cluster_tol)
    if noiseless:
        x_st, x_im, z_st, z_im = solve_noiseless(m, basis, gamma)
    else:
        x_st, x_im, z_st, z_im = solve_noisy(m, K, basis)
    x_st, z_st = x_st / np.linalg.norm(x_st), z_st / np.linalg.norm(z_st)
    x = DualQuaternion(x_st, x_im - (x_st @ x_im) * x_st)
    z = DualQuaternion(z_st, z_im - (z_st @ z_im) * z_st)
    cx = canonicalize(x)
    if cx is not x:
        x, z = cx, -z
    return AxzbSolution(
        x=x,
        z=z,
        branch="noiseless" if noiseless else "noisy",
        sigma1=basis.value,
        multiplicity=basis.multiplicity,
        residual=residual_axzb(m, x, z),
        gamma=gamma,
    )
