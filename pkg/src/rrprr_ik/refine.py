"""Damped least-squares refinement of an approximate joint vector.

Used as a fallback near the ends of the joint ranges, where the closed-form
solution loses accuracy. The Jacobian is estimated numerically from the
chain-product FK.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kinematics import forward_kinematics_batch
from .metrics import rotation_log
from .model import JointVector, Pose, RobotModel


@dataclass(frozen=True)
class RefineParams:
    max_iters: int = 100
    damping: float = 1e-3
    step_tolerance: float = 1e-14
    residual_tolerance: tuple[float, float] = (1e-10, 1e-10)
    fd_step: float = 1e-6
    max_damping: float = 1e10

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        for name in ("damping", "step_tolerance", "fd_step", "max_damping"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if min(self.residual_tolerance) <= 0:
            raise ValueError("residual tolerances must be positive")


@dataclass
class RefineResult:
    joints: JointVector
    position_residual: float
    rotation_residual: float
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list)


def _q(q) -> np.ndarray:
    return q.as_array() if isinstance(q, JointVector) else np.asarray(q, dtype=float).reshape(5)


def pose_residual(model: RobotModel, q, target: Pose) -> np.ndarray:
    """``[P_target - P(q), log(R_target R(q)^T)]`` as a 6-vector."""
    rot, pos = forward_kinematics_batch(model, _q(q))
    return np.concatenate([np.asarray(target.position) - pos,
                           rotation_log(np.asarray(target.rotation) @ rot.T)])


def numeric_jacobian(model: RobotModel, q, fd_step: float = 1e-6) -> np.ndarray:
    """Central-difference FK Jacobian, shape ``(6, 5)``.

    Rows 0-2 are the position derivative; rows 3-5 the spatial angular
    velocity, taken from the relative rotation between the two probes.
    """
    q = _q(q)
    probes = np.concatenate([q + fd_step * np.eye(5), q - fd_step * np.eye(5)])
    rot, pos = forward_kinematics_batch(model, probes)
    jac = np.empty((6, 5))
    for k in range(5):
        jac[:3, k] = (pos[k] - pos[k + 5]) / (2 * fd_step)
        jac[3:, k] = rotation_log(rot[k] @ rot[k + 5].T) / (2 * fd_step)
    return jac


def conditioning(model: RobotModel, q, fd_step: float = 1e-6) -> dict:
    """Singular values and condition number of the FK Jacobian at ``q``."""
    sv = np.linalg.svd(numeric_jacobian(model, q, fd_step), compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    return {"singular_values": sv.tolist(), "condition_number": cond}


def project_to_range(model: RobotModel, q, margin: float = 1e-9) -> np.ndarray:
    """Clamp into the joint ranges; full-turn joints are wrapped instead."""
    q = _q(q).copy()
    bounds = model.joint_bounds
    for k in range(5):
        lo, hi = bounds[k]
        if k != 2 and np.isclose(hi - lo, 2 * np.pi):
            if not lo <= q[k] <= hi:
                q[k] = lo + np.mod(q[k] - lo, 2 * np.pi)
            continue
        pad = 0.0 if k == 2 else margin
        q[k] = np.clip(q[k], lo + pad, hi - pad)
    return q


def refine(model: RobotModel, target: Pose, q0, params: RefineParams | None = None) -> RefineResult:
    """Levenberg-Marquardt iteration from ``q0`` toward ``target``.

    Steps that do not reduce the residual norm are rejected and the damping
    raised tenfold; accepted steps divide it by ten. ``history`` records the
    residual norm after every accepted iterate, starting from the projected
    ``q0``.
    """
    params = params or RefineParams()
    q = _q(q0)
    if not np.all(np.isfinite(q)):
        raise ValueError("q0 must be finite")
    q = project_to_range(model, q)
    r = pose_residual(model, q, target)
    cost = float(np.linalg.norm(r))
    history = [cost]
    lam = params.damping
    pos_tol, rot_tol = params.residual_tolerance

    def done(res):
        return np.linalg.norm(res[:3]) <= pos_tol and np.linalg.norm(res[3:]) <= rot_tol

    it = 0
    while it < params.max_iters and not done(r):
        it += 1
        jac = numeric_jacobian(model, q, params.fd_step)
        jtj = jac.T @ jac
        grad = jac.T @ r
        step = np.linalg.solve(jtj + lam * np.eye(5), grad)
        q_new = project_to_range(model, q + step)
        r_new = pose_residual(model, q_new, target)
        cost_new = float(np.linalg.norm(r_new))
        if cost_new < cost:
            moved = float(np.linalg.norm(q_new - q))
            q, r, cost = q_new, r_new, cost_new
            history.append(cost)
            lam = max(lam / 10.0, 1e-12)
            if moved < params.step_tolerance:
                break
        else:
            lam *= 10.0
            if lam > params.max_damping:
                break

    return RefineResult(
        joints=JointVector.from_array(q),
        position_residual=float(np.linalg.norm(r[:3])),
        rotation_residual=float(np.linalg.norm(r[3:])),
        iterations=it,
        converged=bool(done(r)),
        history=history,
    )
