"""Synthetic experiments: fixtures, noise, error metrics, sweeps and an oracle.

The published fixture matrices are printed to four decimals, so their
rotation blocks are only orthonormal to about 1e-4. Every printed matrix is
projected onto SO(3) before use; ``B = Z^-1 A X`` is then computed exactly
from the projected matrices, which makes the fixture data consistent to
machine precision. Errors can be measured against either the printed or
the projected ground truth.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from dqcalib import axxb, axzb
from dqcalib import quat as Q
from dqcalib.axxb import MotionSet
from dqcalib.axzb import MeasurementSet
from dqcalib.dual import Pose
from dqcalib.errors import TooFewMeasurements, UnknownFixture

PRINTED_X = np.array([
    [0.9995, -0.0100, 0.0297, 9.190],
    [0.0116, 0.9986, -0.0523, 5.397],
    [-0.0291, 0.0526, 0.9982, 0.0],
    [0.0, 0.0, 0.0, 1.0],
])

PRINTED_Z = np.array([
    [0.2790, -0.0981, -0.9553, 164.226],
    [-0.5439, 0.8037, -0.2414, 301.638],
    [0.7914, 0.5869, 0.1709, 0.0],
    [0.0, 0.0, 0.0, 1.0],
])

PRINTED_A = np.array([
    [[0.1752, -0.6574, 0.7329, -10.5536],
     [0.6325, -0.4954, -0.5954, -30.5304],
     [0.7545, 0.5679, 0.3290, 50.4851],
     [0.0, 0.0, 0.0, 1.0]],
    [[-0.0745, 0.9661, 0.2471, -20.4123],
     [0.8573, -0.0645, 0.5108, -50.8904],
     [0.5094, 0.2499, -0.8234, 80.8685],
     [0.0, 0.0, 0.0, 1.0]],
    [[-0.1456, -0.6867, 0.7122, -20.5519],
     [0.8252, -0.4814, -0.2955, -30.6491],
     [0.5458, 0.5447, 0.6367, 60.4312],
     [0.0, 0.0, 0.0, 1.0]],
    [[-0.1434, -0.5250, 0.8389, -10.5892],
     [0.8158, -0.5427, -0.2001, -50.6730],
     [0.5603, 0.6557, 0.5061, 80.4641],
     [0.0, 0.0, 0.0, 1.0]],
])

PARALLEL_AXIS = np.array([0.0, 0.0, 1.0])
PARALLEL_ANGLES = np.array([np.pi / 6, np.pi / 3, -np.pi / 6, -np.pi / 3])
PARALLEL_T = np.array([
    [-10.9865, 12.3788, -27.2571],
    [38.8986, 84.6736, -93.8814],
    [-75.7189, -53.6187, 28.5794],
    [-52.8133, 93.3732, -70.1666],
])

FIXTURES = ("paper-nonparallel", "paper-parallel", "random")


def project_pose(T) -> Pose:
    """Pose of a homogeneous matrix whose rotation block is only nearly orthonormal."""
    T = np.asarray(T, dtype=float)
    return Pose(Q.nearest_rotation(T[:3, :3]), T[:3, 3])


@dataclass(frozen=True, eq=False)
class GroundTruth:
    X: Pose
    Z: Pose


@dataclass(frozen=True, eq=False)
class Fixture:
    """Measurement poses ``A`` with the ground truth that generated ``B``."""

    name: str
    A: list[Pose]
    truth: GroundTruth
    printed_X: np.ndarray | None = None
    printed_Z: np.ndarray | None = None
    axis: np.ndarray | None = None
    printed_A: np.ndarray | None = None

    @property
    def B(self) -> list[Pose]:
        return [b for _, b in measurement_poses(self.truth, self.A)]

    def measurements(self) -> MeasurementSet:
        return make_measurements(self.truth, self.A)

    def motions(self) -> MotionSet:
        return make_motions(self.measurements())


def paper_ground_truth() -> GroundTruth:
    return GroundTruth(project_pose(PRINTED_X), project_pose(PRINTED_Z))


def paper_nonparallel() -> Fixture:
    return Fixture("paper-nonparallel", [project_pose(A) for A in PRINTED_A], paper_ground_truth(),
                   PRINTED_X, PRINTED_Z, printed_A=PRINTED_A)


def paper_parallel() -> Fixture:
    A = [Pose(Q.quat_to_rotation(Q.axis_angle(PARALLEL_AXIS, th)), t)
         for th, t in zip(PARALLEL_ANGLES, PARALLEL_T)]
    return Fixture("paper-parallel", A, paper_ground_truth(), PRINTED_X, PRINTED_Z, PARALLEL_AXIS)


def random_pose(rng: np.random.Generator, t_scale: float = 1.0) -> Pose:
    return Pose(Q.quat_to_rotation(Q.random_unit(rng)), t_scale * rng.uniform(-1.0, 1.0, 3))


def random_fixture(n: int = 4, seed: int = 0, t_scale: float = 1.0) -> Fixture:
    """Random ground truth and ``n`` random measurement poses (full precision)."""
    rng = np.random.default_rng(seed)
    truth = GroundTruth(random_pose(rng, t_scale), random_pose(rng, t_scale))
    A = [random_pose(rng, t_scale) for _ in range(n)]
    return Fixture("random", A, truth)


def fixture(name: str, n: int = 4, seed: int = 0) -> Fixture:
    if name == "paper-nonparallel":
        return paper_nonparallel()
    if name == "paper-parallel":
        return paper_parallel()
    if name == "random":
        return random_fixture(n, seed)
    raise UnknownFixture(name)


def measurement_poses(truth: GroundTruth, A: list[Pose]) -> list[tuple[Pose, Pose]]:
    Zinv = truth.Z.inverse()
    return [(Ai, Zinv @ Ai @ truth.X) for Ai in A]


def make_measurements(truth: GroundTruth, A: list[Pose]) -> MeasurementSet:
    """``B_i = Z^-1 A_i X`` by homogeneous algebra, then both sides as dual quaternions."""
    return MeasurementSet.from_poses(measurement_poses(truth, A))


def motion_poses(pairs: list[tuple[Pose, Pose]]) -> list[tuple[Pose, Pose]]:
    if len(pairs) < 2:
        raise TooFewMeasurements("motions need at least two measurements")
    out = []
    for i in range(len(pairs)):
        for j in range(i + 1, len(pairs)):
            (Ai, Bi), (Aj, Bj) = pairs[i], pairs[j]
            out.append((Ai.inverse() @ Aj, Bi.inverse() @ Bj))
    return out


def make_motions(meas: MeasurementSet) -> MotionSet:
    """All ``n (n - 1) / 2`` relative motions ``(A_i^-1 A_j, B_i^-1 B_j)``, ``i < j``."""
    if len(meas) < 2:
        raise TooFewMeasurements("motions need at least two measurements")
    pairs = []
    for i in range(len(meas)):
        ai, bi = meas.pairs[i]
        for j in range(i + 1, len(meas)):
            aj, bj = meas.pairs[j]
            pairs.append((ai.conjugate() * aj, bi.conjugate() * bj))
    return MotionSet(pairs)


@dataclass(frozen=True)
class NoiseModel:
    sigma: float
    seed: int | np.random.SeedSequence = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


def perturb_pose(T: Pose, noise: NoiseModel | float, rng: np.random.Generator | None = None) -> Pose:
    """Additive Gaussian noise on the rotation quaternion (then renormalized) and translation.

    ``sigma == 0`` returns ``T`` itself. Without an explicit ``rng`` the
    model's seed fixes the draw.
    """
    if not isinstance(noise, NoiseModel):
        noise = NoiseModel(float(noise))
    if noise.sigma == 0:
        return T
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    q = Q.rotation_to_quat(T.R) + noise.sigma * rng.standard_normal(4)
    t = T.t + noise.sigma * rng.standard_normal(3)
    return Pose(Q.quat_to_rotation(q / np.linalg.norm(q)), t)


def estimation_error(X, X_true) -> float:
    """Frobenius norm of the difference of two homogeneous matrices."""
    X = X.matrix if isinstance(X, Pose) else np.asarray(X, dtype=float)
    X_true = X_true.matrix if isinstance(X_true, Pose) else np.asarray(X_true, dtype=float)
    return float(np.linalg.norm(X - X_true))


def _slide(pose: Pose, d: np.ndarray) -> Pose:
    return Pose(pose.R, pose.t + d)


def canonicalize_parallel(sol, axis=PARALLEL_AXIS):
    """Slide a degenerate solution along the common rotation axis.

    With all measured rotations about ``axis``, left-composing ``X`` (and
    ``Z``) with a pure translation along the axis leaves the residual
    unchanged. The slide chosen here zeroes the axial component of X's
    translation. Returns a dict with the canonical ``X`` (and ``Z``) poses.
    """
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    X = sol.pose_x if hasattr(sol, "pose_x") else sol.pose
    d = -(X.t @ n) * n
    out = {"X": _slide(X, d)}
    if hasattr(sol, "pose_z"):
        out["Z"] = _slide(sol.pose_z, d)
    return out


def _solve_pairs(equation: str, meas_pairs, gamma: float, tol_noiseless: float):
    meas = MeasurementSet.from_poses(meas_pairs)
    if equation == "axxb":
        return axxb.solve(make_motions(meas), gamma, tol_noiseless)
    return axzb.solve(meas, gamma, tol_noiseless)


@dataclass
class SweepConfig:
    equation: str = "axzb"
    sigma_max: float = 0.02
    sigma_step: float = 0.002
    runs: int = 10
    seed: int = 0
    fixture: str = "paper-nonparallel"
    gamma: float = axxb.GAMMA
    tol_noiseless: float = axxb.TOL_NOISELESS

    def sigmas(self) -> np.ndarray:
        if self.sigma_step <= 0:
            raise ValueError("sigma_step must be positive")
        count = int(np.floor(self.sigma_max / self.sigma_step + 1e-9)) + 1
        return self.sigma_step * np.arange(count)


@dataclass
class ErrorReport:
    sigma: float
    mean_e_X: float
    mean_e_Z: float
    runs: int
    e_X: list[float] = field(default_factory=list)
    e_Z: list[float] = field(default_factory=list)
    noisy_branch: int = 0


def noisy_run(fx: Fixture, equation: str, sigma: float, rng: np.random.Generator,
              gamma: float = axxb.GAMMA, tol_noiseless: float = axxb.TOL_NOISELESS):
    """One solve on the fixture with every ``B_i`` perturbed; returns ``(solution, e_X, e_Z)``."""
    pairs = [(A, perturb_pose(B, NoiseModel(sigma), rng)) for A, B in measurement_poses(fx.truth, fx.A)]
    sol = _solve_pairs(equation, pairs, gamma, tol_noiseless)
    if equation == "axxb":
        return sol, estimation_error(sol.pose, fx.truth.X), float("nan")
    return sol, estimation_error(sol.pose_x, fx.truth.X), estimation_error(sol.pose_z, fx.truth.Z)


def robustness_sweep(cfg: SweepConfig) -> list[ErrorReport]:
    """Average errors over ``cfg.runs`` noisy solves for every sigma on the grid.

    Errors are measured against the (projected) ground truth that generated
    the data. Each (sigma, run) cell draws from its own child of the master
    seed, so rows are reproducible independently of each other.
    """
    if cfg.equation not in ("axxb", "axzb"):
        raise ValueError(f"unknown equation {cfg.equation!r}")
    fx = fixture(cfg.fixture, seed=cfg.seed)
    sigmas = cfg.sigmas()
    children = np.random.SeedSequence(cfg.seed).spawn(len(sigmas))
    rows = []
    for sigma, child in zip(sigmas, children):
        ex, ez, noisy = [], [], 0
        for run_seed in child.spawn(cfg.runs):
            sol, e_x, e_z = noisy_run(fx, cfg.equation, float(sigma), np.random.default_rng(run_seed),
                                      cfg.gamma, cfg.tol_noiseless)
            ex.append(e_x)
            ez.append(e_z)
            noisy += sol.branch == "noisy"
        rows.append(ErrorReport(float(sigma), float(np.mean(ex)), float(np.mean(ez)), cfg.runs, ex, ez, noisy))
    return rows


def sweep_csv(rows: list[ErrorReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sigma", "mean_e_X", "mean_e_Z", "runs"])
    for r in rows:
        w.writerow([f"{r.sigma:.12g}", f"{r.mean_e_X:.12e}", f"{r.mean_e_Z:.12e}", r.runs])
    return buf.getvalue()


# --- independent oracle -------------------------------------------------------


def homogeneous_residual(pairs, X: Pose, Z: Pose | None = None) -> float:
    """``sum ||A_i X - X B_i||_F^2`` (or ``A_i X - Z B_i`` when ``Z`` is given)."""
    Xm = X.matrix
    Zm = Xm if Z is None else Z.matrix
    return float(sum(np.sum((A.matrix @ Xm - Zm @ B.matrix) ** 2) for A, B in pairs))


def _unpack(p):
    q = p[:4] / np.linalg.norm(p[:4])
    return Pose(Q.quat_to_rotation(q), p[4:7])


@dataclass(frozen=True, eq=False)
class OracleSolution:
    X: Pose
    Z: Pose | None
    residual: float
    starts: int


def oracle_solve(pairs, equation: str = "axxb", starts: int = 64, seed: int = 0) -> OracleSolution:
    """Multi-start nonlinear least squares on the homogeneous residual.

    Works directly on pose pairs: each unknown is a quaternion (normalized
    inside the residual) plus a translation. Independent of the dual
    quaternion machinery; meant for cross-checking the solvers.
    """
    pairs = [(A, B) for A, B in pairs]
    As = np.array([A.matrix for A, _ in pairs])
    Bs = np.array([B.matrix for _, B in pairs])
    two = equation == "axzb"

    def fun(p):
        X = _unpack(p[:7]).matrix
        Z = _unpack(p[7:14]).matrix if two else X
        r = As @ X - Z @ Bs
        return np.concatenate([r[:, :3, :].ravel(), [np.linalg.norm(p[:4]) - 1.0]]
                              + ([[np.linalg.norm(p[7:11]) - 1.0]] if two else []))

    rng = np.random.default_rng(seed)
    t_scale = max(1.0, float(np.abs(As[:, :3, 3]).max()), float(np.abs(Bs[:, :3, 3]).max()))
    best = None
    for _ in range(starts):
        p0 = np.concatenate([Q.random_unit(rng), t_scale * rng.uniform(-1, 1, 3)])
        if two:
            p0 = np.concatenate([p0, Q.random_unit(rng), t_scale * rng.uniform(-1, 1, 3)])
        res = least_squares(fun, p0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
        X = _unpack(res.x[:7])
        Z = _unpack(res.x[7:14]) if two else None
        value = homogeneous_residual(pairs, X, Z)
        if best is None or value < best.residual:
            best = OracleSolution(X, Z, value, starts)
    return best


def solution_residual(pairs, sol) -> float:
    """Homogeneous residual of a solver solution on the given pose pairs."""
    if hasattr(sol, "pose_z"):
        return homogeneous_residual(pairs, sol.pose_x, sol.pose_z)
    return homogeneous_residual(pairs, sol.pose)
