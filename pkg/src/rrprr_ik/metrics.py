"""Pose reconstruction error metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .model import is_rotation

_SO3_INPUT_TOL = 1e-6


@dataclass(frozen=True)
class PoseError:
    dx: float
    dy: float
    dz: float
    drot: float

    def __post_init__(self):
        if min(self.dx, self.dy, self.dz, self.drot) < 0:
            raise ValueError("pose error components must be nonnegative")
        if self.drot > np.pi + 1e-9:
            raise ValueError("rotation error exceeds pi")


def position_error(p, p_prime) -> np.ndarray:
    """Per-axis absolute differences ``|p - p'|``; broadcasts over leading axes."""
    return np.abs(np.asarray(p, dtype=float) - np.asarray(p_prime, dtype=float))


def geodesic_angle(r, r_prime) -> np.ndarray:
    """Rotation angle of ``r' r^T`` for stacks of matrices, no input validation.

    The angle is recovered from both the cosine ``(trace - 1) / 2`` and the
    sine (half the norm of the skew part) with ``atan2``; ``acos`` alone
    loses about half the digits near zero. The value equals the half-trace
    Frobenius norm of ``log(r' r^T)``.
    """
    r = np.asarray(r, dtype=float)
    r_prime = np.asarray(r_prime, dtype=float)
    rel = r_prime @ np.swapaxes(r, -1, -2)
    cos = (np.trace(rel, axis1=-2, axis2=-1) - 1.0) / 2.0
    skew = np.stack([rel[..., 2, 1] - rel[..., 1, 2],
                     rel[..., 0, 2] - rel[..., 2, 0],
                     rel[..., 1, 0] - rel[..., 0, 1]], axis=-1)
    sin = np.linalg.norm(skew, axis=-1) / 2.0
    return np.arctan2(sin, np.clip(cos, -1.0, 1.0))


def rotation_geodesic(r, r_prime) -> float:
    """Geodesic distance on SO(3) between two rotations, in ``[0, pi]``.

    Raises ``ValueError`` if either input is not a rotation within 1e-6.
    """
    for name, m in (("r", r), ("r_prime", r_prime)):
        if not is_rotation(m, _SO3_INPUT_TOL):
            raise ValueError(f"{name} is not a rotation matrix")
    return float(geodesic_angle(r, r_prime))


def pose_error(target, reconstructed) -> PoseError:
    """Absolute per-axis position error and geodesic rotation error."""
    dx, dy, dz = position_error(target.position, reconstructed.position)
    return PoseError(float(dx), float(dy), float(dz),
                     rotation_geodesic(target.rotation, reconstructed.rotation))


def quaternion_angle(r, r_prime) -> float:
    """Rotation distance via the quaternion double cover: ``2 acos(|<q, q'>|)``."""
    q = Rotation.from_matrix(r).as_quat()
    q_prime = Rotation.from_matrix(r_prime).as_quat()
    return float(2.0 * np.arccos(min(1.0, abs(float(q @ q_prime)))))


def rotation_log(r) -> np.ndarray:
    """Axis-angle vector of a rotation matrix (the vee of its matrix logarithm)."""
    return Rotation.from_matrix(r).as_rotvec()
