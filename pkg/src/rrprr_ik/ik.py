"""Closed-form inverse kinematics for the RRPRR arm.

The solver projects the wrist centre onto the base plane for ``theta1``,
then branches on ``R2z``:

* case 1 (``|R2z| >= r2z_tol``): a 2x2 linear system in ``cos(theta4)`` and
  ``cot(theta2)`` followed by a 2x2 system in ``sin/cos(theta5)``;
* case 2 (coplanar links, ``theta4 = 0``): ``theta2`` from the
  base/shoulder/wrist triangle and ``theta5`` from the summed angle.

``d3`` is then read off one of three position equations and the candidate
is checked against two identities every reachable pose satisfies.

Every step has a vectorized core working on stacks of poses; the public
single-pose functions wrap the cores and raise :class:`IkFailure`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .kinematics import base_identity, forward_kinematics_batch, wrist_identity
from .metrics import geodesic_angle
from .model import JointVector, Pose, RobotModel, Transform4, is_rotation


class Branch(enum.IntEnum):
    CASE1 = 1
    CASE2 = 2


class FailureReason(enum.IntEnum):
    """Why a pose was rejected; ``0`` is reserved for success in batch status arrays."""

    THETA1_UNDEFINED = 1
    THETA2_OUT_OF_RANGE = 2
    THETA5_OUT_OF_RANGE = 3
    NO_D3_IN_RANGE = 4
    CONSTRAINT_VIOLATED = 5
    TRIANGLE_DEGENERATE = 6
    JOINT_OUT_OF_RANGE = 7


OK = 0


def status_name(code: int) -> str:
    return "ok" if code == OK else FailureReason(code).name.lower()


class IkFailure(Exception):
    """Raised when a target pose has no admissible solution."""

    def __init__(self, reason: FailureReason, diagnostics: dict | None = None):
        self.reason = FailureReason(reason)
        self.diagnostics = diagnostics or {}
        super().__init__(f"{self.reason.name.lower()}: {self.diagnostics}")


@dataclass(frozen=True)
class IkOptions:
    """Solver tolerances.

    r2z_tol
        ``|R2z|`` below this selects the coplanar branch.
    theta1_tol
        minimum distance (m) of the wrist centre from the base z axis.
    constraint_tol
        acceptance threshold for both identity residuals.
    d3_slack
        how far (m) a ``d3`` candidate may sit outside the prismatic range;
        accepted values are clamped back into range.
    denominator_tol
        ``d3`` candidates whose denominator is smaller are ignored.
    range_margin
        open angular ranges are checked as closed ranges shrunk by this much.
    triangle_tol
        minimum ``2 t1 t3`` for the case-2 cosine rule.
    """

    r2z_tol: float = 1e-9
    theta1_tol: float = 1e-9
    constraint_tol: float = 1e-8
    d3_slack: float = 1e-9
    denominator_tol: float = 1e-6
    range_margin: float = 1e-9
    triangle_tol: float = 1e-12

    def __post_init__(self):
        for name, value in vars(self).items():
            if not value >= 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class IkSolution:
    joints: JointVector
    branch: Branch
    constraint_residuals: tuple[float, float]
    d3_candidates: tuple[float | None, float | None, float | None]
    d3_denominators: tuple[float, float, float]
    fk_residual: tuple[float, float]


@dataclass
class IkBatchResult:
    """Column-wise solver output for ``n`` targets.

    ``joints`` holds whatever was computed before the first failure (NaN
    for steps never reached); ``status`` is ``0`` on success or a
    :class:`FailureReason` code.
    """

    joints: np.ndarray
    status: np.ndarray
    branch: np.ndarray
    residuals: np.ndarray
    d3_candidates: np.ndarray
    d3_denominators: np.ndarray
    position_error: np.ndarray
    rotation_error: np.ndarray
    extras: dict = field(default_factory=dict)

    @property
    def accepted(self) -> np.ndarray:
        return self.status == OK

    def __len__(self):
        return len(self.status)


def _wrap(angle):
    """Wrap angles into ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - angle, 2 * np.pi)


# vectorized cores ----------------------------------------------------------

def _wrist_position(model: RobotModel, rot, pos):
    return pos - model.l3 * rot[..., :, 0]


def _case1_core(rot, c1, s1):
    r2x, r2y, r2z = rot[..., 0, 1], rot[..., 1, 1], rot[..., 2, 1]
    # [[s1, c1 R2z], [-c1, s1 R2z]] [cos4, cot2]^T = [R2x, R2y]^T, det = R2z
    with np.errstate(divide="ignore", invalid="ignore"):
        cos4 = s1 * r2x - c1 * r2y
        cot2 = (c1 * r2x + s1 * r2y) / r2z
        theta2 = np.arctan2(1.0, cot2)
        c2, s2 = np.cos(theta2), np.sin(theta2)
        theta4 = np.arctan2(-r2z / s2, cos4)
    c4 = np.cos(theta4)
    # [[-c2, -c4 s2], [-c4 s2, c2]] [s5, c5]^T = [R1z, R3z]^T
    a, b = -c2, -c4 * s2
    det = a * c2 - b * b
    r1z, r3z = rot[..., 2, 0], rot[..., 2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        s5 = (c2 * r1z - b * r3z) / det
        c5 = (a * r3z - b * r1z) / det
    theta5 = np.arctan2(s5, c5)
    return theta2, theta4, theta5, cot2


def _case2_core(model: RobotModel, rot, wrist, c1, s1):
    shoulder = np.array([0.0, 0.0, model.l1])
    t1 = abs(model.l1)
    t2 = np.linalg.norm(wrist, axis=-1)
    t3 = np.linalg.norm(shoulder - wrist, axis=-1)
    denom = 2.0 * t1 * t3
    with np.errstate(divide="ignore", invalid="ignore"):
        cos_arg = np.clip((t1 ** 2 + t3 ** 2 - t2 ** 2) / denom, -1.0, 1.0)
    theta2 = np.pi - np.arccos(cos_arg)
    # project both tangent ratios onto the arm plane: avoids 0/0 when c1 or s1 vanish
    sin_sum = -(c1 * rot[..., 0, 2] + s1 * rot[..., 1, 2])
    cos_sum = -(c1 * rot[..., 0, 0] + s1 * rot[..., 1, 0])
    angle_sum = np.arctan2(sin_sum, cos_sum)
    theta5_a = _wrap(angle_sum - theta2)
    theta5_b = _wrap(angle_sum - theta2 + np.pi)
    return theta2, theta5_a, theta5_b, denom


def _d3_core(model: RobotModel, pos, theta1, theta2, theta4, theta5):
    c1, s1 = np.cos(theta1), np.sin(theta1)
    c2, s2 = np.cos(theta2), np.sin(theta2)
    c4, s4 = np.cos(theta4), np.sin(theta4)
    c5, s5 = np.cos(theta5), np.sin(theta5)
    l1, l2, l3 = model.l1, model.l2, model.l3
    px, py, pz = pos[..., 0], pos[..., 1], pos[..., 2]
    num = np.stack([
        px - l2 * c1 * s2 + l3 * (c5 * s1 * s4 + c5 * c1 * c2 * c4) - l3 * c1 * s2 * s5,
        py - l2 * s1 * s2 - l3 * (c5 * c1 * s4 - c5 * s1 * c2 * c4) - l3 * s1 * s2 * s5,
        # Pz = l1 - (l2 + d3) c2 - ..., so the divisor is -c2
        pz - l1 + l2 * c2 + l3 * c2 * s5 + l3 * c4 * c5 * s2,
    ], axis=-1)
    den = np.stack([c1 * s2, s1 * s2, -c2], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cand = num / den
    return cand, den


def _select_d3(model: RobotModel, cand, den, options: IkOptions):
    usable = np.abs(den) >= options.denominator_tol
    lo = model.d3_min - options.d3_slack
    hi = model.d3_max + options.d3_slack
    valid = usable & (cand >= lo) & (cand <= hi)
    weight = np.where(valid, np.abs(den), -1.0)
    pick = np.argmax(weight, axis=-1)
    found = np.take_along_axis(valid, pick[..., None], -1)[..., 0]
    value = np.take_along_axis(cand, pick[..., None], -1)[..., 0]
    value = np.clip(value, model.d3_min, model.d3_max)
    return np.where(found, value, np.nan), found


def solve_batch(model: RobotModel, rotations, positions, options: IkOptions | None = None) -> IkBatchResult:
    """Solve IK for stacks of targets ``(n, 3, 3)`` and ``(n, 3)``."""
    options = options or IkOptions()
    rot = np.asarray(rotations, dtype=float).reshape(-1, 3, 3)
    pos = np.asarray(positions, dtype=float).reshape(-1, 3)
    n = len(rot)
    status = np.zeros(n, dtype=np.int8)

    def fail(mask, reason):
        status[(status == OK) & mask] = reason

    wrist = _wrist_position(model, rot, pos)
    fail(np.hypot(wrist[:, 0], wrist[:, 1]) < options.theta1_tol, FailureReason.THETA1_UNDEFINED)
    theta1 = np.arctan2(wrist[:, 1], wrist[:, 0])
    c1, s1 = np.cos(theta1), np.sin(theta1)

    case1 = np.abs(rot[:, 2, 1]) >= options.r2z_tol
    branch = np.where(case1, Branch.CASE1, Branch.CASE2).astype(np.int8)

    t2_a, t4_a, t5_a, cot2 = _case1_core(rot, c1, s1)
    t2_b, t5_b1, t5_b2, tri = _case2_core(model, rot, wrist, c1, s1)

    lo5 = model.theta5_range[0] + options.range_margin
    hi5 = model.theta5_range[1] - options.range_margin

    def in5(x):
        return (x >= lo5) & (x <= hi5)

    t5_b = np.where(in5(t5_b1) | ~in5(t5_b2), t5_b1, t5_b2)
    theta2 = np.where(case1, t2_a, t2_b)
    theta4 = np.where(case1, t4_a, 0.0)
    theta5 = np.where(case1, t5_a, t5_b)

    fail(case1 & ~(cot2 > 0), FailureReason.THETA2_OUT_OF_RANGE)
    fail(~case1 & (tri < options.triangle_tol), FailureReason.TRIANGLE_DEGENERATE)
    fail(~in5(theta5), FailureReason.THETA5_OUT_OF_RANGE)

    cand, den = _d3_core(model, pos, theta1, theta2, theta4, theta5)
    d3, found = _select_d3(model, cand, den, options)
    fail(~found, FailureReason.NO_D3_IN_RANGE)

    residuals = np.stack([wrist_identity(rot, theta4, theta5),
                          base_identity(rot, theta1, theta2)], axis=-1)
    fail(~np.all(np.abs(residuals) <= options.constraint_tol, axis=-1), FailureReason.CONSTRAINT_VIOLATED)

    joints = np.stack([theta1, theta2, d3, theta4, theta5], axis=-1)
    inside = model.in_range(np.where(np.isnan(joints), 0.0, joints), options.range_margin)
    fail(~inside[:, 1], FailureReason.THETA2_OUT_OF_RANGE)
    fail(~inside[:, 4], FailureReason.THETA5_OUT_OF_RANGE)
    fail(~inside[:, 2], FailureReason.NO_D3_IN_RANGE)
    fail(~(inside[:, 0] & inside[:, 3]), FailureReason.JOINT_OUT_OF_RANGE)

    perr = np.full(n, np.nan)
    rerr = np.full(n, np.nan)
    ok = status == OK
    if ok.any():
        fk_rot, fk_pos = forward_kinematics_batch(model, joints[ok])
        perr[ok] = np.linalg.norm(fk_pos - pos[ok], axis=-1)
        rerr[ok] = geodesic_angle(rot[ok], fk_rot)

    return IkBatchResult(
        joints=joints, status=status, branch=branch, residuals=residuals,
        d3_candidates=cand, d3_denominators=den,
        position_error=perr, rotation_error=rerr,
        extras={"cot_theta2": cot2, "triangle_denominator": tri},
    )


# single-pose API ------------------------------------------------------------

def _pose_arrays(target: Pose):
    return np.asarray(target.rotation)[None], np.asarray(target.position)[None]


def wrist_transform(target: Pose, model: RobotModel) -> Transform4:
    """Pose of the wrist frame (frame 5): the target with the fixed end link removed."""
    if not is_rotation(target.rotation, 1e-6):
        raise ValueError("target rotation is not in SO(3)")
    return Transform4(target.rotation, _wrist_position(model, target.rotation, target.position))


def solve_theta1(wrist_position, tol: float = 1e-9) -> float:
    """Base pan angle from the wrist centre's projection onto the base XY plane."""
    x, y = float(wrist_position[0]), float(wrist_position[1])
    if math.hypot(x, y) < tol:
        raise IkFailure(FailureReason.THETA1_UNDEFINED, {"wrist_position": tuple(map(float, wrist_position))})
    return math.atan2(y, x)


def solve_case1(target: Pose, theta1: float, model: RobotModel | None = None,
                r2z_tol: float = 1e-9, margin: float = 1e-9) -> tuple[float, float, float]:
    """``(theta2, theta4, theta5)`` when the wrist is twisted out of the arm plane."""
    model = model or RobotModel()
    rot = np.asarray(target.rotation)
    if abs(rot[2, 1]) < r2z_tol:
        raise ValueError("R2z below the branch threshold; use solve_case2")
    t2, t4, t5, cot2 = (float(v) for v in _case1_core(rot, math.cos(theta1), math.sin(theta1)))
    if not cot2 > 0:
        raise IkFailure(FailureReason.THETA2_OUT_OF_RANGE, {"cot_theta2": cot2})
    lo, hi = model.theta5_range
    if not lo + margin <= t5 <= hi - margin:
        raise IkFailure(FailureReason.THETA5_OUT_OF_RANGE, {"theta5": t5})
    return t2, t4, t5


def solve_case2(target: Pose, theta1: float, model: RobotModel | None = None,
                triangle_tol: float = 1e-12, margin: float = 1e-9) -> tuple[float, float, float]:
    """``(theta2, 0, theta5)`` when all links are coplanar."""
    model = model or RobotModel()
    rot = np.asarray(target.rotation)
    wrist = _wrist_position(model, rot, np.asarray(target.position))
    t2, t5a, t5b, tri = (float(v) for v in _case2_core(model, rot, wrist, math.cos(theta1), math.sin(theta1)))
    if tri < triangle_tol:
        raise IkFailure(FailureReason.TRIANGLE_DEGENERATE, {"2*t1*t3": tri})
    lo, hi = model.theta5_range[0] + margin, model.theta5_range[1] - margin
    for t5 in (t5a, t5b):
        if lo <= t5 <= hi:
            return t2, 0.0, t5
    raise IkFailure(FailureReason.THETA5_OUT_OF_RANGE, {"candidates": (t5a, t5b)})


def d3_candidates(model: RobotModel, target: Pose, theta1, theta2, theta4, theta5):
    """The three ``d3`` estimates and their denominators ``(c1 s2, s1 s2, -c2)``."""
    cand, den = _d3_core(model, np.asarray(target.position), theta1, theta2, theta4, theta5)
    return tuple(map(float, cand)), tuple(map(float, den))


def solve_d3(model: RobotModel, target: Pose, theta1, theta2, theta4, theta5,
             slack: float = 1e-9, denominator_tol: float = 1e-6) -> float:
    """Prismatic extension from the best-conditioned in-range candidate."""
    cand, den = _d3_core(model, np.asarray(target.position), theta1, theta2, theta4, theta5)
    opts = IkOptions(d3_slack=slack, denominator_tol=denominator_tol)
    value, found = _select_d3(model, cand, den, opts)
    if not found:
        raise IkFailure(FailureReason.NO_D3_IN_RANGE,
                        {"candidates": tuple(map(float, cand)), "denominators": tuple(map(float, den))})
    return float(value)


def check_constraints(target: Pose, joints: JointVector) -> tuple[float, float]:
    """Residuals ``(wrist, base)`` of the two identities at a candidate solution."""
    rot = np.asarray(target.rotation)
    return (float(wrist_identity(rot, joints.theta4, joints.theta5)),
            float(base_identity(rot, joints.theta1, joints.theta2)))


def solve(model: RobotModel, target: Pose, options: IkOptions | None = None) -> IkSolution:
    """Full pipeline for one target; raises :class:`IkFailure` on the first failed step."""
    if not is_rotation(target.rotation, 1e-6):
        raise ValueError("target rotation is not in SO(3)")
    res = solve_batch(model, *_pose_arrays(target), options)
    code = int(res.status[0])
    den = tuple(float(v) for v in res.d3_denominators[0])
    tol = (options or IkOptions()).denominator_tol
    cands = tuple(float(c) if abs(d) >= tol else None for c, d in zip(res.d3_candidates[0], den))
    if code != OK:
        raise IkFailure(FailureReason(code), {
            "joints": tuple(float(v) for v in res.joints[0]),
            "branch": Branch(int(res.branch[0])).name,
            "constraint_residuals": tuple(float(v) for v in res.residuals[0]),
            "d3_candidates": cands,
            "d3_denominators": den,
        })
    return IkSolution(
        joints=JointVector.from_array(res.joints[0]),
        branch=Branch(int(res.branch[0])),
        constraint_residuals=(float(res.residuals[0, 0]), float(res.residuals[0, 1])),
        d3_candidates=cands,
        d3_denominators=den,
        fk_residual=(float(res.position_error[0]), float(res.rotation_error[0])),
    )
