"""Acceptance suite: one PASS/FAIL line per criterion.

Under pytest each criterion is one test and the verdict lines are repeated
in the terminal summary. ``python3 tests/test_acceptance.py`` runs all of
them and prints only the verdict lines.
"""

import time

import numpy as np

from dqcalib import axxb, axzb, harness
from dqcalib import quat as Q
from dqcalib.axxb import MotionSet
from dqcalib.axzb import MeasurementSet
from dqcalib.dual import DualNumber, DualQuaternion, dn_compare, dq_magnitude, dqvec_norm

from acceptance_report import report

TRIALS = 100


def _max(values):
    return float(np.max(values))


# 1 --------------------------------------------------------------------------


def criterion_1():
    """Exact recovery on 100 seeded random instances at the default gamma, 50 ms per solve."""
    fixtures = [harness.random_fixture(4, seed) for seed in range(TRIALS)]
    axxb.solve(fixtures[0].motions())
    axzb.solve(fixtures[0].measurements())
    ex1, ex2, ez2, times = [], [], [], []
    for fx in fixtures:
        motions, meas = fx.motions(), fx.measurements()
        t0 = time.perf_counter()
        s1 = axxb.solve(motions)
        t1 = time.perf_counter()
        s2 = axzb.solve(meas)
        t2 = time.perf_counter()
        times += [t1 - t0, t2 - t1]
        ex1.append(harness.estimation_error(s1.pose, fx.truth.X))
        ex2.append(harness.estimation_error(s2.pose_x, fx.truth.X))
        ez2.append(harness.estimation_error(s2.pose_z, fx.truth.Z))
    tol = 1e-6
    ok_err = max(ex1 + ex2 + ez2) <= tol
    ok_time = max(times) <= 0.05
    detail = (f"AX=XB max e_X {_max(ex1):.2e} ({sum(e <= tol for e in ex1)}/{TRIALS} within 1e-6); "
              f"AX=ZB max e_X {_max(ex2):.2e}, max e_Z {_max(ez2):.2e} "
              f"({sum(max(a, b) <= tol for a, b in zip(ex2, ez2))}/{TRIALS} within 1e-6); "
              f"slowest solve {1e3 * max(times):.1f} ms")
    return ok_err and ok_time, detail


# 2-4 ------------------------------------------------------------------------


def criterion_2():
    fx = harness.paper_nonparallel()
    sol = axxb.solve(fx.motions())
    e = harness.estimation_error(sol.pose, fx.printed_X)
    e_proj = harness.estimation_error(sol.pose, fx.truth.X)
    return max(e, e_proj) <= 0.01, f"e_X {e:.2e} vs printed X, {e_proj:.2e} vs projected X; branch {sol.branch}"


def criterion_3():
    fx = harness.paper_nonparallel()
    sol = axzb.solve(fx.measurements())
    ex = harness.estimation_error(sol.pose_x, fx.printed_X)
    ez = harness.estimation_error(sol.pose_z, fx.printed_Z)
    return ex <= 0.01 and ez <= 0.05, f"e_X {ex:.2e}, e_Z {ez:.2e}; branch {sol.branch}"


def criterion_4():
    fx = harness.paper_parallel()
    s1 = axxb.solve(fx.motions())
    s2 = axzb.solve(fx.measurements())
    c1 = harness.canonicalize_parallel(s1, harness.PARALLEL_AXIS)
    c2 = harness.canonicalize_parallel(s2, harness.PARALLEL_AXIS)
    ex1 = harness.estimation_error(c1["X"], fx.printed_X)
    ex2 = harness.estimation_error(c2["X"], fx.printed_X)
    ez2 = harness.estimation_error(c2["Z"], fx.printed_Z)
    ok = ex1 <= 0.05 and ex2 <= 0.05 and ez2 <= 0.1 and s1.multiplicity == 2 and s2.multiplicity == 2
    return ok, (f"AX=XB e_X {ex1:.2e} (k={s1.multiplicity}); "
                f"AX=ZB e_X {ex2:.2e}, e_Z {ez2:.2e} (k={s2.multiplicity})")


# 5 --------------------------------------------------------------------------


def criterion_5():
    lam, gap = [], []
    exact = [harness.random_fixture(4, seed) for seed in range(TRIALS)]
    exact += [harness.paper_nonparallel(), harness.paper_parallel()]
    for fx in exact:
        m = fx.motions().aligned()
        lam.append(axxb.rotation_stage(axxb.build_matrices(m), len(m))[0].value)
        m = fx.measurements().aligned()
        gap.append(len(m) - axzb.rotation_stage(axzb.build_matrices(m), len(m))[0].value)
    ok_exact = max(lam) <= 1e-10 and max(gap) <= 1e-10
    fx = harness.paper_nonparallel()
    rates = {}
    for sigma in (0.002, 0.02):
        for eq in ("axxb", "axzb"):
            seeds = np.random.SeedSequence(500).spawn(TRIALS)
            noisy = sum(harness.noisy_run(fx, eq, sigma, np.random.default_rng(s))[0].branch == "noisy"
                        for s in seeds)
            rates[(eq, sigma)] = noisy
    ok_noisy = min(rates.values()) >= 0.95 * TRIALS
    rate_text = ", ".join(f"{eq} sigma={s}: {r}/{TRIALS}" for (eq, s), r in rates.items())
    return ok_exact and ok_noisy, (f"exact max lambda0 {max(lam):.1e}, max n-sigma1 {max(gap):.1e}; "
                                   f"noisy branch {rate_text}")


# 6 --------------------------------------------------------------------------


def criterion_6():
    fx = harness.paper_nonparallel()
    sigmas = (0.005, 0.01, 0.02)
    gaps = {"axxb": [], "axzb": []}
    for i in range(20):
        rng = np.random.default_rng(600 + i)
        sigma = sigmas[i % 3]
        meas = [(A, harness.perturb_pose(B, sigma, rng)) for A, B in harness.measurement_poses(fx.truth, fx.A)]
        motions = harness.motion_poses(meas)
        for eq, pairs, sol in (("axxb", motions, axxb.solve(MotionSet.from_poses(motions))),
                               ("axzb", meas, axzb.solve(MeasurementSet.from_poses(meas)))):
            mine = harness.solution_residual(pairs, sol)
            oracle = harness.oracle_solve(pairs, eq, starts=64, seed=i).residual
            gaps[eq].append(abs(mine - oracle) / oracle)
    worst = max(max(g) for g in gaps.values())
    return worst <= 1e-4, (f"max relative gap AX=XB {max(gaps['axxb']):.2e}, AX=ZB {max(gaps['axzb']):.2e} "
                           f"(median {np.median(gaps['axxb']):.2e}, {np.median(gaps['axzb']):.2e})")


# 7 --------------------------------------------------------------------------


def _close(a, b, scale=1.0):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) <= 1e-10 * max(1.0, scale)


def _random_unit_dq(rng):
    st = Q.random_unit(rng)
    im = rng.standard_normal(4)
    return DualQuaternion(st, im - (im @ st) * st)


def criterion_7():
    rng = np.random.default_rng(7)
    N = 1000
    failures = {}

    def check(name, ok):
        failures[name] = failures.get(name, 0) + (not ok)

    for _ in range(N):
        a, b, q = rng.standard_normal(4), rng.standard_normal(4), rng.standard_normal(4)
        r1, r2 = rng.standard_normal(2)
        s = float(np.abs(a).max() * np.abs(b).max())
        # quaternion scalar part and left/right matrices
        check("Sc linear", _close(Q.scalar_part(r1 * a + r2 * b), r1 * a[0] + r2 * b[0], abs(r1) + abs(r2)))
        dot = a @ b
        for v in (Q.multiply(Q.conjugate(a), b), Q.multiply(a, Q.conjugate(b)),
                  Q.multiply(Q.conjugate(b), a), Q.multiply(b, Q.conjugate(a))):
            check("Sc inner product", _close(v[0], dot, s))
        check("M, W of conjugate", _close(Q.left_matrix(Q.conjugate(a)), Q.left_matrix(a).T)
              and _close(Q.right_matrix(Q.conjugate(a)), Q.right_matrix(a).T))
        ab = Q.multiply(a, b)
        check("M(a)b = W(b)a = ab", _close(Q.left_matrix(a) @ b, ab, s) and _close(Q.right_matrix(b) @ a, ab, s))
        n2 = a @ a
        check("M^T M = W^T W = |a|^2 I", _close(Q.left_matrix(a).T @ Q.left_matrix(a), n2 * np.eye(4), n2)
              and _close(Q.right_matrix(a).T @ Q.right_matrix(a), n2 * np.eye(4), n2))
        # orthogonality survives conjugation
        b_perp = b - (a @ b) / n2 * a
        qs = Q.conjugate(q)
        l1 = Q.multiply(Q.multiply(qs, Q.multiply(Q.conjugate(a), b_perp)), q)
        l2 = Q.multiply(Q.multiply(qs, Q.multiply(Q.conjugate(b_perp), a)), q)
        sc = float(q @ q) * float(np.linalg.norm(a) * np.linalg.norm(b_perp))
        check("Sc(a* b) = 0 preserved", _close(l1[0], 0.0, sc) and _close(l2[0], 0.0, sc))
        # unit dual quaternions
        u = _random_unit_dq(rng)
        c1 = Q.multiply(Q.multiply(Q.conjugate(a), Q.multiply(Q.conjugate(u.st), u.im)), a)
        c2 = Q.multiply(Q.multiply(Q.conjugate(a), Q.multiply(Q.conjugate(u.im), u.st)), a)
        sc = n2 * float(np.linalg.norm(u.im))
        check("unit DQ scalar parts vanish", _close((u.st @ u.im), 0.0) and _close(c1[0], 0.0, sc)
              and _close(c2[0], 0.0, sc))
        # total order: integers make ties in either part common
        p, qd, rd = (DualNumber(*rng.integers(-2, 3, 2).astype(float)) for _ in range(3))
        ok = dn_compare(p, qd) == -dn_compare(qd, p)
        ok &= (dn_compare(p, qd) == 0) == (p == qd)
        if dn_compare(p, qd) <= 0 and dn_compare(qd, rd) <= 0:
            ok &= dn_compare(p, rd) <= 0
        if dn_compare(p, qd) < 0:
            ok &= dn_compare(p + rd, qd + rd) < 0
        check("total order", ok)
        # 2-norm identity against dual arithmetic sqrt(sum |x_i|^2)
        v = [DualQuaternion(rng.standard_normal(4), rng.standard_normal(4)) for _ in range(rng.integers(1, 6))]
        total = DualNumber(0.0)
        for e in v:
            m = dq_magnitude(e)
            total = total + m * m
        root_st = np.sqrt(total.standard)
        root_im = total.infinitesimal / (2 * root_st)
        nv = dqvec_norm(v)
        check("2-norm identity", _close(nv.standard, root_st, root_st) and _close(nv.infinitesimal, root_im, abs(root_im)))
        # quadratic forms
        n = int(rng.integers(1, 6))
        pairs = [(_random_unit_dq(rng), _random_unit_dq(rng)) for _ in range(n)]
        L = axxb.build_matrices(MotionSet(pairs))
        x = DualQuaternion(rng.standard_normal(4), rng.standard_normal(4))
        f = [pa * x - x * pb for pa, pb in pairs]
        fst, fim = sum(e.st @ e.st for e in f), sum(e.im @ e.im for e in f)
        check("L quadratic forms", _close(fst, x.st @ L.L11 @ x.st, fst) and _close(
            fim, x.im @ L.L11 @ x.im + 2 * x.im @ L.L12 @ x.st + x.st @ L.L22 @ x.st, fim))
        K = axzb.build_matrices(MeasurementSet(pairs))
        xu, zu = _random_unit_dq(rng), _random_unit_dq(rng)
        g = [pa * xu - zu * pb for pa, pb in pairs]
        gst = sum(e.st @ e.st for e in g)
        gsc = sum(e.st @ e.im for e in g)
        rhs = -(xu.st @ (K.K12 + K.K21) @ zu.st + xu.st @ K.K11 @ zu.im + xu.im @ K.K11 @ zu.st)
        check("K quadratic forms", _close(gst, 2 * n - 2 * xu.st @ K.K11 @ zu.st, n) and _close(gsc, rhs, abs(gsc)))
    bad = {k: v for k, v in failures.items() if v}
    detail = f"{len(failures)} identity families x {N} instances at 1e-10"
    if bad:
        detail += "; failing: " + ", ".join(f"{k} ({v})" for k, v in bad.items())
    return not bad, detail


# 8 --------------------------------------------------------------------------


def criterion_8():
    fx = harness.paper_nonparallel()
    s1, s2 = axxb.solve(fx.motions()), axzb.solve(fx.measurements())
    floor = {"axxb": (harness.estimation_error(s1.pose, fx.truth.X), float("nan")),
             "axzb": (harness.estimation_error(s2.pose_x, fx.truth.X), harness.estimation_error(s2.pose_z, fx.truth.Z))}
    ok, parts = True, []
    for eq in ("axxb", "axzb"):
        rows = harness.robustness_sweep(harness.SweepConfig(equation=eq, seed=8))
        text = harness.sweep_csv(rows)
        by_sigma = {round(r.sigma, 6): r for r in rows}
        lo, hi, zero = by_sigma[0.002], by_sigma[0.02], rows[0]
        ok &= len(rows) == 11 and len(text.splitlines()) == 12
        ok &= zero.sigma == 0.0 and zero.e_X == [floor[eq][0]] * zero.runs and zero.mean_e_X <= 0.01
        ok &= np.isfinite(hi.mean_e_X) and hi.mean_e_X > lo.mean_e_X
        if eq == "axzb":
            ok &= zero.e_Z == [floor[eq][1]] * zero.runs and zero.mean_e_Z <= 0.05
            ok &= np.isfinite(hi.mean_e_Z) and hi.mean_e_Z > lo.mean_e_Z
        parts.append(f"{eq}: {len(rows)} rows, sigma=0 e_X {zero.mean_e_X:.1e}, "
                     f"e_X {lo.mean_e_X:.3g} at 0.002 -> {hi.mean_e_X:.3g} at 0.02")
    return bool(ok), "; ".join(parts)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4,
            criterion_5, criterion_6, criterion_7, criterion_8]


def _run(number):
    ok, detail = CRITERIA[number - 1]()
    assert report(number, ok, detail), detail


def test_criterion_1_exact_recovery():
    _run(1)


def test_criterion_2_table_axxb():
    _run(2)


def test_criterion_3_table_axzb():
    _run(3)


def test_criterion_4_parallel_axes():
    _run(4)


def test_criterion_5_noiseless_detection():
    _run(5)


def test_criterion_6_oracle_equivalence():
    _run(6)


def test_criterion_7_algebra_invariants():
    _run(7)


def test_criterion_8_robustness_sweep():
    _run(8)


if __name__ == "__main__":
    for i, crit in enumerate(CRITERIA, 1):
        report(i, *crit())
