"""Acceptance suite: one PASS/FAIL line per criterion, each at its stated size and tolerance."""

import json
import math
import time

import numpy as np
import pytest

from rrprr_ik.cli import main
from rrprr_ik.evaluation import ShellSpec, run_evaluation, sample_joints
from rrprr_ik.ik import IkOptions, solve_batch
from rrprr_ik.kinematics import (base_identity, closed_form_elements, forward_kinematics_batch,
                                 published_r2x, wrist_identity)
from rrprr_ik.metrics import geodesic_angle, quaternion_angle
from rrprr_ik.model import Pose, RobotModel
from rrprr_ik.refine import RefineParams, refine

from conftest import random_rotation

pytestmark = pytest.mark.acceptance

MODEL = RobotModel()


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number} ({title}): {detail}")
        assert ok, detail
    return emit


def uniform_joints(rng, n):
    b = MODEL.joint_bounds
    return rng.uniform(b[:, 0], b[:, 1], size=(n, 5))


def test_criterion_1_fk_identities(verdict):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    q = uniform_joints(rng, 100_000)
    rot, _ = forward_kinematics_batch(MODEL, q)
    wrist = np.max(np.abs(wrist_identity(rot, q[:, 3], q[:, 4])))
    base = np.max(np.abs(base_identity(rot, q[:, 0], q[:, 1])))
    ortho = np.max(np.abs(rot @ np.swapaxes(rot, -1, -2) - np.eye(3)))
    elapsed = time.perf_counter() - start
    ok = wrist < 1e-12 and base < 1e-12 and ortho < 1e-12 and elapsed < 10
    verdict(1, "FK identities", ok,
            f"wrist {wrist:.2e}, base {base:.2e}, orthonormality {ortho:.2e}, {elapsed:.2f} s")


def round_trip_error(q):
    rot, pos = forward_kinematics_batch(MODEL, q)
    res = solve_batch(MODEL, rot, pos)
    return int(np.sum(~res.accepted)), float(np.max(np.abs(res.joints - q)))


def test_criterion_2_round_trip(verdict):
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    general = sample_joints(rng, MODEL, 100_000, margin=1e-3, min_abs_theta4=0.05)
    coplanar = sample_joints(rng, MODEL, 10_000, margin=1e-3)
    coplanar[:, 3] = 0.0
    fail1, err1 = round_trip_error(general)
    fail2, err2 = round_trip_error(coplanar)
    elapsed = time.perf_counter() - start
    ok = fail1 == 0 and fail2 == 0 and err1 < 1e-9 and err2 < 1e-9 and elapsed < 30
    verdict(2, "round trip", ok,
            f"case 1 max error {err1:.2e} ({fail1} rejected), case 2 max error {err2:.2e} "
            f"({fail2} rejected), {elapsed:.2f} s")


def test_criterion_3_closed_form(verdict):
    rng = np.random.default_rng(3)
    q = uniform_joints(rng, 10_000)
    rot, pos = forward_kinematics_batch(MODEL, q)
    crot, cpos = closed_form_elements(MODEL, q)
    dev = max(np.max(np.abs(rot - crot)), np.max(np.abs(pos - cpos)))

    generic = np.array([0.7, 0.4, 0.4, 1.1, 0.9])
    c1, s1, c2, c4, s4 = (math.cos(0.7), math.sin(0.7), math.cos(0.4), math.cos(1.1), math.sin(1.1))
    r = forward_kinematics_batch(MODEL, generic)[0]
    printed_norm = published_r2x(generic) ** 2 + r[1, 1] ** 2 + r[2, 1] ** 2
    expected_excess = 4 * s1 * c1 * c2 * c4 * s4
    broken = abs(printed_norm - 1 - expected_excess) < 1e-12 and abs(expected_excess) > 0.1
    verdict(3, "closed-form FK", dev < 1e-12 and broken,
            f"max element deviation {dev:.2e}; printed R2x column norm^2 - 1 = {printed_norm - 1:.6f} "
            f"(4 s1 c1 c2 c4 s4 = {expected_excess:.6f})")


def test_criterion_4_metric_oracle(verdict):
    rng = np.random.default_rng(4)
    worst = ident = sym = inv = 0.0
    for _ in range(10_000):
        r, rp, g, h = (random_rotation(rng) for _ in range(4))
        d = float(geodesic_angle(r, rp))
        worst = max(worst, abs(d - quaternion_angle(r, rp)))
        ident = max(ident, abs(float(geodesic_angle(r, r))))
        sym = max(sym, abs(d - float(geodesic_angle(rp, r))))
        inv = max(inv, abs(d - float(geodesic_angle(g @ r @ h, g @ rp @ h))))
    ok = worst < 1e-9 and ident < 1e-9 and sym < 1e-12 and inv < 1e-9
    verdict(4, "geodesic metric", ok,
            f"oracle {worst:.2e}, identity {ident:.2e}, symmetry {sym:.2e}, bi-invariance {inv:.2e}")


DEFAULT_EVAL = dict(r2z_tol=0.05, constraint_tol=0.05, d3_slack=0.02)


def test_criterion_5_monte_carlo(verdict):
    start = time.perf_counter()
    rep = run_evaluation(MODEL, ShellSpec.from_model(MODEL), n=1_000_000, seed=5,
                         options=IkOptions(**DEFAULT_EVAL))
    elapsed = time.perf_counter() - start
    frac = rep.acceptance_fraction
    mean = rep.mean or {}
    ok = (bool(mean) and max(mean["dx"], mean["dy"], mean["dz"]) <= 0.02 and mean["drot"] <= 0.07
          and 0.60 <= frac <= 0.85 and elapsed < 300)
    means = ", ".join(f"{k} {v:.4g}" for k, v in mean.items())
    verdict(5, "Monte-Carlo reproduction", ok,
            f"acceptance {frac:.4f}, means [{means}], failures {rep.failures}, {elapsed:.1f} s")


def test_criterion_6_tight_tolerance(verdict):
    rep = run_evaluation(MODEL, ShellSpec.from_model(MODEL), n=1_000_000, seed=5,
                         options=IkOptions(**{**DEFAULT_EVAL, "r2z_tol": 1e-8, "constraint_tol": 1e-8}))
    mean = rep.mean or {}
    worst = max(mean.values()) if mean else float("nan")
    ok = bool(mean) and worst < 1e-9
    verdict(6, "tight tolerance", ok,
            f"{rep.accepted_count} accepted, largest mean error {worst:.3g}, "
            f"std {rep.std}")


def test_criterion_7_refinement(verdict):
    rng = np.random.default_rng(7)
    q = sample_joints(rng, MODEL, 1000, margin=0.02)
    rot, pos = forward_kinematics_batch(MODEL, q)
    res = solve_batch(MODEL, rot, pos)
    start_q = np.where(res.accepted[:, None], res.joints, q)
    angles = [0, 1, 3, 4]
    start_q[:, angles] += rng.choice([-1.0, 1.0], size=(1000, 4)) * 1e-2
    params = RefineParams(max_iters=50, residual_tolerance=(1e-8, 1e-8))
    converged = monotone = 0
    worst_iters = 0
    for i in range(1000):
        out = refine(MODEL, Pose(rot[i], pos[i]), start_q[i], params)
        if out.converged and out.position_residual < 1e-8 and out.rotation_residual < 1e-8:
            converged += 1
            worst_iters = max(worst_iters, out.iterations)
        monotone += all(b <= a for a, b in zip(out.history, out.history[1:]))
    ok = converged >= 990 and monotone == 1000
    verdict(7, "refinement", ok,
            f"{converged}/1000 converged (max {worst_iters} iterations), {monotone}/1000 monotone")


def test_criterion_8_determinism(verdict, tmp_path):
    reports = []
    for workers in (1, 2):
        out = tmp_path / f"w{workers}.json"
        assert main(["eval", "--samples", "100000", "--seed", "42", "--workers", str(workers),
                     "--out", str(out)]) == 0
        body = json.loads(out.read_text())
        reports.append({k: body[k] for k in ("total_samples", "accepted_count", "mean", "std",
                                             "failures", "branches")})
    verdict(8, "determinism", reports[0] == reports[1],
            f"acceptance {reports[0]['accepted_count']} vs {reports[1]['accepted_count']}, "
            f"means equal: {reports[0]['mean'] == reports[1]['mean']}")
