"""Forward kinematics of the RRPRR chain.

The chain product of the six D-H transforms is the reference FK. The
expanded element equations in :func:`fk_closed_form` are kept as an
independent cross-check. Two of the commonly printed element equations
carry a sign error in one term each:

* ``R2x`` printed as ``-c4 s1 - c1 c2 s4``; the chain product gives
  ``s1 c4 - c1 c2 s4``.
* ``Py`` printed with ``+ l3 (c5 c1 s4 + c5 s1 c2 c4)``; the chain product
  gives ``+ l3 (c5 c1 s4 - c5 s1 c2 c4)``.

The printed forms are available from :func:`published_r2x` and
:func:`published_py` so the discrepancy stays testable.
"""

from __future__ import annotations

import numpy as np

from .model import DhRow, JointVector, Pose, RobotModel, Transform4


def _as_joint_array(q) -> np.ndarray:
    if isinstance(q, JointVector):
        return q.as_array()
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != 5:
        raise ValueError(f"joint arrays need a trailing axis of length 5, got shape {q.shape}")
    return q


def dh_matrix(alpha, a, d, theta) -> np.ndarray:
    """Homogeneous D-H transform; arguments broadcast, result has shape ``(..., 4, 4)``."""
    alpha, a, d, theta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (alpha, a, d, theta)))
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    m = np.zeros(theta.shape + (4, 4))
    m[..., 0, 0] = ct
    m[..., 0, 1] = -st * ca
    m[..., 0, 2] = st * sa
    m[..., 0, 3] = a * ct
    m[..., 1, 0] = st
    m[..., 1, 1] = ct * ca
    m[..., 1, 2] = -ct * sa
    m[..., 1, 3] = a * st
    m[..., 2, 1] = sa
    m[..., 2, 2] = ca
    m[..., 2, 3] = d
    m[..., 3, 3] = 1.0
    return m


def dh_transform(row: DhRow, joint_value: float = 0.0) -> Transform4:
    """Transform of frame i+1 seen from frame i for one D-H row."""
    return Transform4.from_matrix(dh_matrix(*row.parameters(joint_value)))


def link_matrices(model: RobotModel, q) -> list[np.ndarray]:
    """The six link transforms for (batched) joint values, each ``(..., 4, 4)``."""
    q = _as_joint_array(q)
    values = [q[..., 0], q[..., 1], q[..., 2], q[..., 3], q[..., 4], np.zeros(q.shape[:-1])]
    mats = []
    for row, value in zip(model.rows, values):
        alpha, a, d, theta = row.parameters(value)
        mats.append(dh_matrix(alpha, a, d, theta))
    return mats


def frame_matrices(model: RobotModel, q) -> list[np.ndarray]:
    """Prefix products ``T^1_0 ... T^6_0`` as a list of ``(..., 4, 4)`` arrays."""
    out = []
    acc = None
    for m in link_matrices(model, q):
        acc = m if acc is None else acc @ m
        out.append(acc)
    return out


def forward_kinematics_batch(model: RobotModel, q) -> tuple[np.ndarray, np.ndarray]:
    """Chain-product FK for joint arrays of shape ``(..., 5)``.

    Returns rotations ``(..., 3, 3)`` and positions ``(..., 3)``.
    """
    t = frame_matrices(model, q)[-1]
    return t[..., :3, :3], t[..., :3, 3]


def forward_kinematics(model: RobotModel, q) -> Pose:
    """End-effector pose for a single joint vector (any real values)."""
    q = _as_joint_array(q)
    if q.shape != (5,):
        raise ValueError("forward_kinematics takes a single joint vector; use forward_kinematics_batch")
    rot, pos = forward_kinematics_batch(model, q)
    return Pose(rot, pos)


def frame_pose(model: RobotModel, q, i: int) -> Transform4:
    """Pose of frame ``i`` (1..6) in the base frame."""
    if not 1 <= i <= 6:
        raise IndexError(f"frame index must be in 1..6, got {i}")
    q = _as_joint_array(q)
    if q.shape != (5,):
        raise ValueError("frame_pose takes a single joint vector")
    return Transform4.from_matrix(frame_matrices(model, q)[i - 1])


def _trig(q):
    q = _as_joint_array(q)
    t1, t2, d3, t4, t5 = (q[..., k] for k in range(5))
    return (np.cos(t1), np.sin(t1), np.cos(t2), np.sin(t2), d3,
            np.cos(t4), np.sin(t4), np.cos(t5), np.sin(t5))


def closed_form_elements(model: RobotModel, q) -> tuple[np.ndarray, np.ndarray]:
    """Expanded FK element equations with the corrected ``R2x`` and ``Py`` terms."""
    c1, s1, c2, s2, d3, c4, s4, c5, s5 = _trig(q)
    l1, l2, l3 = model.l1, model.l2, model.l3

    r1x = c1 * s2 * s5 - c5 * (s1 * s4 + c1 * c2 * c4)
    r1y = c5 * (c1 * s4 - c2 * c4 * s1) + s1 * s2 * s5
    r1z = -c2 * s5 - c4 * c5 * s2
    r2x = s1 * c4 - c1 * c2 * s4
    r2y = -c1 * c4 - c2 * s1 * s4
    r2z = -s2 * s4
    r3x = -c1 * s2 * c5 - s5 * (s1 * s4 + c1 * c2 * c4)
    r3y = s5 * (c1 * s4 - c2 * c4 * s1) - s1 * s2 * c5
    r3z = c2 * c5 - s2 * c4 * s5
    px = l2 * c1 * s2 - l3 * (c5 * s1 * s4 + c5 * c1 * c2 * c4) + l3 * c1 * s2 * s5 + d3 * c1 * s2
    py = l2 * s1 * s2 + l3 * (c5 * c1 * s4 - c5 * s1 * c2 * c4) + l3 * s1 * s2 * s5 + d3 * s1 * s2
    pz = l1 - l2 * c2 - l3 * c2 * s5 - l3 * c4 * c5 * s2 - d3 * c2

    rot = np.stack([np.stack([r1x, r2x, r3x], -1),
                    np.stack([r1y, r2y, r3y], -1),
                    np.stack([r1z, r2z, r3z], -1)], -2)
    pos = np.stack([px, py, pz], -1)
    return rot, pos


def fk_closed_form(model: RobotModel, q) -> Pose:
    """Single-vector FK from the expanded element equations."""
    rot, pos = closed_form_elements(model, q)
    if rot.shape != (3, 3):
        raise ValueError("fk_closed_form takes a single joint vector; use closed_form_elements")
    return Pose(rot, pos)


def published_r2x(q) -> np.ndarray:
    """``R2x`` exactly as usually printed (``-c4 s1 - c1 c2 s4``); off by ``2 s1 c4``."""
    c1, s1, c2, s2, d3, c4, s4, c5, s5 = _trig(q)
    return -c4 * s1 - c1 * c2 * s4


def published_py(model: RobotModel, q) -> np.ndarray:
    """``Py`` exactly as usually printed; off by ``2 l3 s1 c2 c4 c5``."""
    c1, s1, c2, s2, d3, c4, s4, c5, s5 = _trig(q)
    l2, l3 = model.l2, model.l3
    return l2 * s1 * s2 + l3 * (c5 * c1 * s4 + c5 * s1 * c2 * c4) + l3 * s1 * s2 * s5 + d3 * s1 * s2


def wrist_identity(rotation, theta4, theta5):
    """``R1z c5 s4 - R2z c4 + R3z s4 s5``; zero on every reachable pose."""
    rotation = np.asarray(rotation, dtype=float)
    c4, s4 = np.cos(theta4), np.sin(theta4)
    c5, s5 = np.cos(theta5), np.sin(theta5)
    return (rotation[..., 2, 0] * c5 * s4 - rotation[..., 2, 1] * c4
            + rotation[..., 2, 2] * s4 * s5)


def base_identity(rotation, theta1, theta2):
    """``R2x c1 s2 - R2z c2 + R2y s1 s2``; zero on every reachable pose."""
    rotation = np.asarray(rotation, dtype=float)
    c1, s1 = np.cos(theta1), np.sin(theta1)
    c2, s2 = np.cos(theta2), np.sin(theta2)
    return (rotation[..., 0, 1] * c1 * s2 - rotation[..., 2, 1] * c2
            + rotation[..., 1, 1] * s1 * s2)
