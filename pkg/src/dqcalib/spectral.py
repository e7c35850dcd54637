"""Small dense spectral problems and the sphere-coupled QCQP engine.

The calibration subproblems all reduce to 4x4 symmetric eigenproblems,
a 4x4 SVD, equality-constrained convex QPs solved through their KKT
system, and one nonconvex piece: minimizing the optimal value of such a
QP over a unit vector ``y`` in ``R^k`` with ``k <= 4``. The last one is
handled by dense deterministic sampling of the sphere followed by
Riemannian gradient refinement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.stats import norm, qmc

from dqcalib.errors import NotSymmetric, SingularKKT

CLUSTER_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Extremal eigen/singular value with an orthonormal basis of its space.

    For an SVD, ``basis`` holds the left vectors ``Q1`` and ``right`` the
    paired right vectors ``Q2`` (column ``j`` of each belong together).
    """

    value: float
    basis: np.ndarray
    right: np.ndarray | None = None

    @property
    def multiplicity(self) -> int:
        return self.basis.shape[1]


def _sign_fix(cols: np.ndarray, *others: np.ndarray):
    # largest-magnitude entry of each column made positive; paired columns follow
    idx = np.argmax(np.abs(cols), axis=0)
    s = np.sign(cols[idx, np.arange(cols.shape[1])])
    s[s == 0] = 1.0
    return (cols * s,) + tuple(o * s for o in others)


def _cluster(values: np.ndarray, extremum: float, tol: float) -> np.ndarray:
    return np.abs(values - extremum) <= tol * max(1.0, abs(extremum))


def sym_extremal_eig(S: np.ndarray, which: Literal["min", "max"] = "min",
                     cluster_tol: float = CLUSTER_TOL) -> SpectralBasis:
    """Extremal eigenvalue of a symmetric matrix and a basis of its eigenspace.

    Eigenvalues within ``cluster_tol * max(1, |value|)`` of the extremum are
    treated as equal, so the returned multiplicity reflects near-degeneracy.

    Raises:
        NotSymmetric: if ``S`` is not symmetric within 1e-10.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {S.shape}")
    if np.abs(S - S.T).max(initial=0.0) > 1e-10 * max(1.0, np.abs(S).max(initial=0.0)):
        raise NotSymmetric("matrix is not symmetric")
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    value = w[0] if which == "min" else w[-1]
    mask = _cluster(w, value, cluster_tol)
    cols = V[:, mask]
    if which == "max":
        cols = cols[:, ::-1]
    (cols,) = _sign_fix(cols)
    return SpectralBasis(float(value), cols)


def svd4(K: np.ndarray, cluster_tol: float = CLUSTER_TOL):
    """SVD ``K = U diag(s) V^T`` plus the paired basis of the top singular value.

    Returns:
        ``(U, s, V, top)`` where ``top.basis`` and ``top.right`` hold the
        columns ``Q1``, ``Q2`` of ``U``, ``V`` for the singular values that
        cluster with ``s[0]``; ``K @ Q2 ~= s[0] * Q1``.
    """
    K = np.asarray(K, dtype=float)
    U, s, Vt = np.linalg.svd(K)
    V = Vt.T
    mask = _cluster(s, s[0], cluster_tol)
    U, V = U.copy(), V.copy()
    U[:, mask], V[:, mask] = _sign_fix(U[:, mask], V[:, mask])
    top = SpectralBasis(float(s[0]), U[:, mask], V[:, mask])
    return U, s, V, top


@dataclass(frozen=True, eq=False)
class EqConstrainedQP:
    """``min x^T H x + 2 c^T x  s.t.  C x = 0`` with ``H`` symmetric positive definite."""

    H: np.ndarray
    c: np.ndarray
    C: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float).reshape(H.shape[0]))
        C = np.asarray(self.C, dtype=float)
        object.__setattr__(self, "C", C.reshape(-1, H.shape[0]) if C.size else np.zeros((0, H.shape[0])))
        if np.abs(H - H.T).max(initial=0.0) > 1e-12 * max(1.0, np.abs(H).max(initial=0.0)):
            raise NotSymmetric("QP Hessian is not symmetric")

    def objective(self, x: np.ndarray) -> float:
        return float(x @ self.H @ x + 2.0 * self.c @ x)


def _kkt(H, c, C):
    m, r = H.shape[0], C.shape[0]
    A = np.zeros((m + r, m + r))
    A[:m, :m] = H
    A[:m, m:] = C.T
    A[m:, :m] = C
    rhs = np.concatenate([-c, np.zeros(r)])
    return A, rhs


def solve_eq_qp(p: EqConstrainedQP, return_multipliers: bool = False):
    """Unique minimizer of an :class:`EqConstrainedQP` via its KKT system.

    Raises:
        SingularKKT: if the constraint rows are dependent or the Hessian is
            not positive definite on the constraint null space.
    """
    r = p.C.shape[0]
    if r and np.linalg.matrix_rank(p.C) < r:
        raise SingularKKT("constraint rows are linearly dependent")
    A, rhs = _kkt(p.H, p.c, p.C)
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularKKT(str(exc)) from exc
    if not np.all(np.isfinite(sol)) or np.linalg.norm(A @ sol - rhs) > 1e-8 * max(1.0, np.linalg.norm(rhs)):
        raise SingularKKT("KKT system is numerically singular")
    m = p.H.shape[0]
    x, mu = sol[:m], sol[m:]
    return (x, mu) if return_multipliers else x


@dataclass(frozen=True, eq=False)
class SphereCoupledProblem:
    """Minimize ``phi(y)`` over unit ``y`` in ``R^k`` where

    ``phi(y) = min_w { w^T H w + 2 (G y)^T w : (D_j y)^T w = 0 for all j } + y^T P y``.

    ``H`` is ``m x m`` positive definite, ``G`` and every ``D_j`` are
    ``m x k``, ``P`` is ``k x k`` symmetric. The objective is even in
    ``(y, w)``.
    """

    H: np.ndarray
    G: np.ndarray
    D: Sequence[np.ndarray]
    P: np.ndarray

    @property
    def k(self) -> int:
        return self.G.shape[1]

    def inner(self, y: np.ndarray) -> EqConstrainedQP:
        C = np.stack([Dj @ y for Dj in self.D])
        return EqConstrainedQP(self.H, self.G @ y, C)

    def value(self, y: np.ndarray) -> float:
        return float(self.evaluate(np.asarray(y, dtype=float)[None, :])[0][0])

    def evaluate(self, Y: np.ndarray):
        """Batched ``phi``, its Euclidean gradient and the inner minimizers.

        Args:
            Y: ``(N, k)`` array of unit vectors.

        Returns:
            ``(values (N,), gradients (N, k), W (N, m))``.
        """
        Y = np.atleast_2d(Y)
        N, m, r = Y.shape[0], self.H.shape[0], len(self.D)
        C = np.stack([Y @ Dj.T for Dj in self.D], axis=1)  # (N, r, m)
        c = Y @ self.G.T  # (N, m)
        A = np.zeros((N, m + r, m + r))
        A[:, :m, :m] = self.H
        A[:, :m, m:] = np.transpose(C, (0, 2, 1))
        A[:, m:, :m] = C
        rhs = np.zeros((N, m + r))
        rhs[:, :m] = -c
        sol = np.linalg.solve(A, rhs[..., None])[..., 0]
        W, mu = sol[:, :m], sol[:, m:]
        PY = Y @ self.P.T
        vals = (np.einsum("ni,ij,nj->n", W, self.H, W) + 2.0 * np.einsum("ni,ni->n", c, W)
                + np.einsum("ni,ni->n", Y, PY))
        grad = 2.0 * W @ self.G + 2.0 * PY
        for j, Dj in enumerate(self.D):
            grad += 2.0 * mu[:, j:j + 1] * (W @ Dj)
        return vals, grad, W


def sphere_samples(k: int, count: int | None = None) -> np.ndarray:
    """Deterministic, well-spread unit vectors in ``R^k`` (half-sphere suffices).

    ``k == 2`` uses ``count`` (default 1024) uniform angles on ``[0, pi)``;
    higher ``k`` uses a Halton sequence (default 4096 points) pushed through
    the Gaussian quantile function and normalized.
    """
    if k == 1:
        return np.ones((1, 1))
    if k == 2:
        count = count or 1024
        th = np.pi * np.arange(count) / count
        return np.column_stack([np.cos(th), np.sin(th)])
    count = count or 4096
    u = qmc.Halton(d=k, scramble=False).random(count + 1)[1:]
    Y = norm.ppf(u)
    return Y / np.linalg.norm(Y, axis=1, keepdims=True)


@dataclass(frozen=True)
class SphereSolution:
    y: np.ndarray
    inner: np.ndarray
    value: float
    grad_norm: float
    iterations: int


def _tangent(y, g):
    return g - (g @ y) * y


def _refine(p: SphereCoupledProblem, y: np.ndarray, gtol: float, max_iter: int):
    """Riemannian gradient descent with Barzilai-Borwein steps and Armijo backtracking."""
    f, g, _ = p.evaluate(y[None])
    f, rg = f[0], _tangent(y, g[0])
    step = 1.0 / max(1e-12, np.abs(p.H).max() + np.abs(p.P).max())
    it = 0
    prev = None
    for it in range(1, max_iter + 1):
        if np.linalg.norm(rg) <= gtol:
            break
        if prev is not None:
            dy, dg = y - prev[0], rg - prev[1]
            denom = float(dy @ dg)
            if denom > 0:
                step = float(dy @ dy) / denom
        alpha = step
        accepted = False
        gg = float(rg @ rg)
        # near the optimum the true decrease drops below the rounding error of f
        slack = 64 * np.finfo(float).eps * max(1.0, abs(f))
        while alpha > 1e-20:
            y_new = y - alpha * rg
            y_new /= np.linalg.norm(y_new)
            f_new, g_new, _ = p.evaluate(y_new[None])
            if f_new[0] <= f - 1e-4 * alpha * gg + slack:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        prev = (y, rg)
        y, f, rg = y_new, f_new[0], _tangent(y_new, g_new[0])
    return y, f, float(np.linalg.norm(rg)), it


def solve_sphere_coupled(p: SphereCoupledProblem, gtol: float = 1e-10, max_iter: int = 500,
                         n_refine: int = 4) -> SphereSolution:
    """Global minimization of ``phi`` over the unit sphere in ``R^k``.

    For ``k == 1`` the answer is ``y = [1]`` (``phi`` is even). Otherwise the
    best ``n_refine`` sphere samples are refined and the lowest result wins.
    """
    k = p.k
    if k < 1 or k > 4:
        raise ValueError(f"sphere dimension must be 1..4, got {k}")
    if k == 1:
        y = np.ones(1)
        vals, grad, W = p.evaluate(y[None])
        return SphereSolution(y, W[0], float(vals[0]), 0.0, 0)

    Y = sphere_samples(k)
    vals, _, _ = p.evaluate(Y)
    order = np.argsort(vals, kind="stable")
    starts = []
    for i in order:
        # skip samples that are near-duplicates (up to sign) of a chosen start
        if all(abs(Y[i] @ Y[j]) < 0.999 for j in starts):
            starts.append(i)
        if len(starts) == n_refine:
            break
    best = None
    for i in starts:
        y, f, gn, it = _refine(p, Y[i].copy(), gtol, max_iter)
        if best is None or f < best[1]:
            best = (y, f, gn, it)
    y, f, gn, it = best
    _, _, W = p.evaluate(y[None])
    return SphereSolution(y, W[0], float(f), gn, it)
