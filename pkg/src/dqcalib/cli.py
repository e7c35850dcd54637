"""Command-line front end.

Exit codes: 0 success, 2 input validation failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
import warnings
from pathlib import Path

import numpy as np

from dqcalib import axxb, axzb, harness
from dqcalib import quat as Q
from dqcalib.dual import Pose
from dqcalib.errors import CalibrationError, MalformedInput, NotARotation, UnknownFixture

FORMAT_VERSION = 1
HOMOGENEOUS_TOL = 1e-9
ROTATION_TOL = 1e-3

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

def parse_matrix(value, where: str) -> Pose:
    """Validate a 4x4 row-major homogeneous matrix and project its rotation onto SO(3)."""
    try:
        T = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise MalformedInput(f"{where}: not a numeric matrix") from exc
    if T.shape != (4, 4) or not np.all(np.isfinite(T)):
        raise MalformedInput(f"{where}: expected a finite 4x4 matrix, got shape {T.shape}")
    if np.abs(T[3] - [0.0, 0.0, 0.0, 1.0]).max() > HOMOGENEOUS_TOL:
        raise MalformedInput(f"{where}: last row must be (0, 0, 0, 1)")
    if not Q.is_rotation(T[:3, :3], ROTATION_TOL):
        raise NotARotation(f"{where}: rotation block is not orthonormal within {ROTATION_TOL}")
    return harness.project_pose(T)


def load_pairs(path) -> tuple[list[tuple[Pose, Pose]], dict]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedInput(f"cannot read {path}: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("pairs"), list):
        raise MalformedInput("expected an object with a 'pairs' list")
    if doc.get("format_version", FORMAT_VERSION) != FORMAT_VERSION:
        raise MalformedInput(f"unsupported format_version {doc.get('format_version')!r}")
    pairs = []
    for i, rec in enumerate(doc["pairs"]):
        if not isinstance(rec, dict) or "A" not in rec or "B" not in rec:
            raise MalformedInput(f"pairs[{i}]: expected keys 'A' and 'B'")
        pairs.append((parse_matrix(rec["A"], f"pairs[{i}].A"), parse_matrix(rec["B"], f"pairs[{i}].B")))
    if not pairs:
        raise MalformedInput("no pose pairs in input")
    return pairs, doc


def pairs_document(pairs, equation: str, fixture: str, truth: dict | None = None) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "pose-pairs",
        "equation": equation,
        "fixture": fixture,
        "pairs": [{"A": np.asarray(A).tolist(), "B": np.asarray(B).tolist()} for A, B in pairs],
    }
    if truth:
        doc["ground_truth"] = {k: np.asarray(v).tolist() for k, v in truth.items()}
    return doc


def parse_axis(text: str) -> np.ndarray:
    named = {"x": [1.0, 0.0, 0.0], "y": [0.0, 1.0, 0.0], "z": [0.0, 0.0, 1.0]}
    if text.lower() in named:
        return np.array(named[text.lower()])
    try:
        axis = np.array([float(v) for v in text.split(",")])
    except ValueError:
        axis = np.zeros(0)
    if axis.shape != (3,) or not np.linalg.norm(axis) > 0:
        raise argparse.ArgumentTypeError(f"bad axis {text!r}; use x, y, z or 'a,b,c'")
    return axis / np.linalg.norm(axis)


def dumps(doc: dict) -> str:
    """JSON with every innermost number list (a matrix row) kept on one line."""
    text = json.dumps(doc, indent=1)
    flat = re.sub(r"\[\s*([^\[\]{}]*?)\s*\]", lambda m: "[" + ", ".join(
        v.strip() for v in m.group(1).split(",")) + "]", text)
    return flat + "\n"


def _write(text: str, out) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_generate(args) -> int:
    fx = harness.fixture(args.fixture, n=args.n, seed=args.seed)
    meas = harness.measurement_poses(fx.truth, fx.A)
    if fx.printed_A is not None:
        # A stays exactly as printed; B comes from the projected matrices
        meas = [(A, B.matrix) for A, (_, B) in zip(fx.printed_A, meas)]
    else:
        meas = [(A.matrix, B.matrix) for A, B in meas]
    if fx.printed_X is not None:
        truth = {"X": fx.printed_X, "Z": fx.printed_Z}
    else:
        truth = {"X": fx.truth.X.matrix, "Z": fx.truth.Z.matrix}
    if args.equation == "axxb":
        projected = [(harness.project_pose(A), Pose.from_matrix(B)) for A, B in meas]
        pairs = [(A.matrix, B.matrix) for A, B in harness.motion_poses(projected)]
        truth.pop("Z")
    else:
        pairs = meas
    doc = pairs_document(pairs, args.equation, args.fixture, truth)
    if fx.axis is not None:
        doc["parallel_axis"] = fx.axis.tolist()
    _write(dumps(doc), args.output)
    return EXIT_OK


def _result(equation: str, sol, args, doc: dict) -> dict:
    axis = args.canonicalize_axis
    if axis is not None:
        poses = harness.canonicalize_parallel(sol, axis)
    elif equation == "axxb":
        poses = {"X": sol.pose}
    else:
        poses = {"X": sol.pose_x, "Z": sol.pose_z}
    out = {"format_version": FORMAT_VERSION, "kind": "result", "equation": equation}
    out.update({k: v.matrix.tolist() for k, v in poses.items()})
    out["branch"] = sol.branch
    if equation == "axxb":
        out["lambda0"] = sol.lambda0
    else:
        out["sigma1"] = sol.sigma1
    out.update({
        "multiplicity": sol.multiplicity,
        "residual_standard": sol.residual.standard,
        "residual_infinitesimal": sol.residual.infinitesimal,
        "gamma": sol.gamma,
        "tol_noiseless": args.tol_noiseless,
    })
    if axis is not None:
        out["canonicalize_axis"] = axis.tolist()
    truth = doc.get("ground_truth") or {}
    errors = {f"e_{k}": harness.estimation_error(poses[k], np.array(truth[k])) for k in poses if k in truth}
    if errors:
        out["errors"] = errors
    return out


def _solve(equation: str, args) -> int:
    pairs, doc = load_pairs(args.input)
    if equation == "axxb":
        sol = axxb.solve(axxb.MotionSet.from_poses(pairs), args.gamma, args.tol_noiseless)
    else:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            sol = axzb.solve(axzb.MeasurementSet.from_poses(pairs), args.gamma, args.tol_noiseless)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    _write(dumps(_result(equation, sol, args, doc)), args.output)
    return EXIT_OK


def cmd_solve_axxb(args) -> int:
    return _solve("axxb", args)


def cmd_solve_axzb(args) -> int:
    return _solve("axzb", args)


def cmd_sweep(args) -> int:
    cfg = harness.SweepConfig(
        equation=args.equation, sigma_max=args.sigma_max, sigma_step=args.sigma_step,
        runs=args.runs, seed=args.seed, fixture=args.fixture, gamma=args.gamma,
        tol_noiseless=args.tol_noiseless,
    )
    _write(harness.sweep_csv(harness.robustness_sweep(cfg)), args.output)
    return EXIT_OK


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _nonnegative(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def _count(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dqcalib", description="Dual quaternion hand-eye calibration.")
    sub = p.add_subparsers(dest="command", required=True)

    def solver_flags(sp):
        sp.add_argument("input", help="pose-pair JSON file")
        sp.add_argument("-o", "--output", help="result file (default: stdout)")
        sp.add_argument("--gamma", type=_positive, default=axxb.GAMMA, help="regularization weight")
        sp.add_argument("--tol-noiseless", type=_nonnegative, default=axxb.TOL_NOISELESS,
                        help="per-pair threshold for the rotationwise-noiseless test")
        sp.add_argument("--canonicalize-axis", metavar="AXIS", type=parse_axis,
                        help="slide the solution along AXIS (x, y, z or a,b,c) so X has no axial translation")

    sp = sub.add_parser("solve-axxb", help="solve A X = X B from motion pairs")
    solver_flags(sp)
    sp.set_defaults(func=cmd_solve_axxb)

    sp = sub.add_parser("solve-axzb", help="solve A X = Z B from measurement pairs")
    solver_flags(sp)
    sp.set_defaults(func=cmd_solve_axzb)

    sp = sub.add_parser("generate", help="write a fixture as a pose-pair file")
    sp.add_argument("--fixture", required=True, help="paper-nonparallel, paper-parallel or random")
    sp.add_argument("--n", type=_count, default=4, help="measurements for the random fixture")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--equation", choices=["axzb", "axxb"], default="axzb",
                    help="axxb writes the n(n-1)/2 relative motions instead of measurements")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("sweep", help="noise robustness sweep, CSV output")
    sp.add_argument("--equation", choices=["axzb", "axxb"], default="axzb")
    sp.add_argument("--sigma-max", type=_nonnegative, default=0.02)
    sp.add_argument("--sigma-step", type=_positive, default=0.002)
    sp.add_argument("--runs", type=_count, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--fixture", default="paper-nonparallel")
    sp.add_argument("--gamma", type=_positive, default=axxb.GAMMA)
    sp.add_argument("--tol-noiseless", type=_nonnegative, default=axxb.TOL_NOISELESS)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (MalformedInput, NotARotation, UnknownFixture, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (CalibrationError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
