import math

import numpy as np
import pytest

from conftest import random_rotation
from rrprr_ik.kinematics import forward_kinematics, forward_kinematics_batch
from rrprr_ik.metrics import rotation_geodesic, rotation_log
from rrprr_ik.model import JointVector, Pose
from rrprr_ik.refine import (RefineParams, conditioning, numeric_jacobian, pose_residual,
                             project_to_range, refine)

J = JointVector.from_degrees


def test_residual_zero_at_solution(model):
    q = J(20, 40, 0.4, 60, 100)
    assert np.max(np.abs(pose_residual(model, q, forward_kinematics(model, q)))) < 1e-15


def test_residual_pure_translation(model):
    q = J(20, 40, 0.4, 60, 100)
    pose = forward_kinematics(model, q)
    shifted = Pose(pose.rotation, pose.position + np.array([0.01, 0, 0]))
    np.testing.assert_allclose(pose_residual(model, q, shifted), [0.01, 0, 0, 0, 0, 0], atol=1e-15)


def test_residual_orientation_norm_is_geodesic(model, rng):
    for _ in range(200):
        q = rng.uniform(-3, 3, size=5)
        target = Pose(random_rotation(rng), rng.normal(size=3))
        r = pose_residual(model, q, target)
        assert np.linalg.norm(r[3:]) == pytest.approx(
            rotation_geodesic(forward_kinematics(model, q).rotation, target.rotation), abs=1e-9)


def test_jacobian_extension_column(model):
    jac = numeric_jacobian(model, J(0, 90, 0.4, 0, 90))
    np.testing.assert_allclose(jac[:3, 2], [1, 0, 0], atol=1e-9)
    np.testing.assert_allclose(jac[3:, 2], 0, atol=1e-9)


def test_jacobian_step_halving(model, rng):
    for _ in range(20):
        q = rng.uniform(-3, 3, size=5)
        h = 1e-4
        diff = numeric_jacobian(model, q, h) - numeric_jacobian(model, q, h / 2)
        # central differences: error shrinks as h^2, bounded by the third derivative scale
        assert np.max(np.abs(diff)) < 10 * h * h


def test_jacobian_wrist_roll_at_coplanar_pose(model, rng):
    for _ in range(20):
        t1, t2, d3, t5 = rng.uniform([-3, 0.1, 0.33, 0.1], [3, 1.5, 0.45, 3.0])
        q = JointVector(t1, t2, d3, 0.0, t5)
        col = numeric_jacobian(model, q)[:, 3]
        normal = np.array([-math.sin(t1), math.cos(t1), 0.0])
        arm = np.array([math.cos(t1) * math.sin(t2), math.sin(t1) * math.sin(t2), -math.cos(t2)])
        # rolling about the arm axis moves the tool straight out of the arm plane
        assert np.linalg.norm(np.cross(col[:3], normal)) < 1e-8
        np.testing.assert_allclose(col[3:], arm, atol=1e-8)


def test_jacobian_against_forward_difference(model, rng):
    for _ in range(50):
        q = rng.uniform(-3, 3, size=5)
        central = numeric_jacobian(model, q)
        h = 1e-7
        rot0, pos0 = forward_kinematics_batch(model, q)
        fwd = np.empty((6, 5))
        for k in range(5):
            qk = q.copy()
            qk[k] += h
            rot, pos = forward_kinematics_batch(model, qk)
            fwd[:3, k] = (pos - pos0) / h
            fwd[3:, k] = rotation_log(rot @ rot0.T) / h
        scale = np.max(np.abs(central))
        assert np.max(np.abs(central - fwd)) / scale < 1e-4


def test_conditioning_report(model):
    report = conditioning(model, J(30, 45, 0.4, 20, 80))
    assert len(report["singular_values"]) == 5
    assert report["condition_number"] >= 1.0


def test_refine_keeps_exact_solution(model):
    q = J(30, 60, 0.4, 45, 90)
    out = refine(model, forward_kinematics(model, q), q)
    assert out.iterations == 0
    assert out.converged
    np.testing.assert_array_equal(out.joints.as_array(), q.as_array())


def test_refine_converges_from_perturbation(model, rng):
    for _ in range(50):
        q = rng.uniform([-3, 0.1, 0.34, -3, 0.1], [3, 1.4, 0.44, 3, 3.0])
        target = forward_kinematics(model, q)
        q0 = q + np.array([1e-2, -1e-2, 0.0, 1e-2, -1e-2])
        out = refine(model, target, q0)
        assert out.converged
        assert out.position_residual < 1e-8 and out.rotation_residual < 1e-8
        assert out.iterations <= 50


def test_refine_unreachable_target_is_monotone(model, rng):
    for _ in range(10):
        target = Pose(random_rotation(rng), rng.uniform(-1, 1, size=3) + np.array([0, 0, -0.9]))
        q0 = rng.uniform([-3, 0.1, 0.34, -3, 0.1], [3, 1.4, 0.44, 3, 3.0])
        out = refine(model, target, q0, RefineParams(max_iters=60))
        assert np.all(np.diff(out.history) <= 0)
        assert out.history[-1] <= out.history[0]
        assert model.contains(out.joints)


def test_refine_output_stays_in_range(model):
    target = forward_kinematics(model, J(0, 89.99, 0.45, 10, 179.99))
    out = refine(model, target, J(0, 120, 0.6, 10, 200))
    assert model.contains(out.joints)


def test_project_to_range_wraps_full_turn(model):
    q = project_to_range(model, [3 * math.pi / 2, -1.0, 0.1, -3 * math.pi / 2, 4.0])
    assert q[0] == pytest.approx(-math.pi / 2)
    assert q[3] == pytest.approx(math.pi / 2)
    assert model.contains(q)


def test_refine_rejects_non_finite_start(model):
    with pytest.raises(ValueError):
        refine(model, forward_kinematics(model, J(0, 45, 0.4, 0, 90)), [0, np.nan, 0.4, 0, 1])


@pytest.mark.parametrize("kwargs", [dict(damping=0.0), dict(fd_step=-1.0), dict(max_iters=-1),
                                    dict(residual_tolerance=(0.0, 1e-9))])
def test_refine_params_validated(kwargs):
    with pytest.raises(ValueError):
        RefineParams(**kwargs)
