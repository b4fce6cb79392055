"""Robot geometry, joint vectors and poses for the RRPRR arm.

All angles are radians and all lengths meters. Degrees appear only when a
model is read from (or written to) a configuration file.
"""

from __future__ import annotations

import configparser
import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

SO3_TOL = 1e-9


class JointKind(enum.Enum):
    REVOLUTE = "revolute"
    PRISMATIC = "prismatic"
    FIXED = "fixed"


@dataclass(frozen=True)
class DhRow:
    """One Denavit-Hartenberg row.

    ``d`` is ``None`` for a prismatic row and ``theta`` is ``None`` for a
    revolute row: the missing slot is filled by the joint value.
    """

    alpha: float
    a: float
    d: float | None
    theta: float | None
    kind: JointKind

    def __post_init__(self):
        if self.kind is JointKind.REVOLUTE and (self.theta is not None or self.d is None):
            raise ValueError("revolute row needs a fixed d and a variable theta")
        if self.kind is JointKind.PRISMATIC and (self.d is not None or self.theta is None):
            raise ValueError("prismatic row needs a fixed theta and a variable d")
        if self.kind is JointKind.FIXED and (self.d is None or self.theta is None):
            raise ValueError("fixed row needs both d and theta")

    def parameters(self, joint_value=0.0):
        """Return ``(alpha, a, d, theta)`` with the joint value substituted."""
        d = joint_value if self.kind is JointKind.PRISMATIC else self.d
        theta = joint_value if self.kind is JointKind.REVOLUTE else self.theta
        return self.alpha, self.a, d, theta


@dataclass(frozen=True)
class JointVector:
    """Joint values in chain order. Any real values are allowed here;
    use :meth:`RobotModel.contains` to test range membership."""

    theta1: float
    theta2: float
    d3: float
    theta4: float
    theta5: float

    def as_array(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2, self.d3, self.theta4, self.theta5], dtype=float)

    @classmethod
    def from_array(cls, values) -> JointVector:
        values = np.asarray(values, dtype=float).reshape(5)
        return cls(*(float(v) for v in values))

    @classmethod
    def from_degrees(cls, theta1, theta2, d3, theta4, theta5) -> JointVector:
        return cls(math.radians(theta1), math.radians(theta2), float(d3),
                   math.radians(theta4), math.radians(theta5))

    def to_degrees(self) -> tuple[float, float, float, float, float]:
        return (math.degrees(self.theta1), math.degrees(self.theta2), self.d3,
                math.degrees(self.theta4), math.degrees(self.theta5))


def _frozen_array(values, shape) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(shape)
    arr.setflags(write=False)
    return arr


def is_rotation(matrix, tol: float = SO3_TOL) -> bool:
    """True if ``matrix`` is orthonormal with determinant +1 within ``tol``."""
    m = np.asarray(matrix, dtype=float)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        return False
    ortho = np.max(np.abs(m.T @ m - np.eye(3)))
    return bool(ortho <= tol and abs(np.linalg.det(m) - 1.0) <= tol)


@dataclass(frozen=True, eq=False)
class Transform4:
    """Homogeneous rigid transform stored as rotation block and translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _frozen_array(self.rotation, (3, 3)))
        object.__setattr__(self, "translation", _frozen_array(self.translation, (3,)))

    @classmethod
    def from_matrix(cls, matrix) -> Transform4:
        m = np.asarray(matrix, dtype=float)
        return cls(m[:3, :3], m[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def __matmul__(self, other: Transform4) -> Transform4:
        return Transform4(self.rotation @ other.rotation,
                          self.rotation @ other.translation + self.translation)

    def inverse(self) -> Transform4:
        rt = self.rotation.T
        return Transform4(rt, -rt @ self.translation)

    def is_rigid(self, tol: float = SO3_TOL) -> bool:
        return is_rotation(self.rotation, tol)


@dataclass(frozen=True, eq=False)
class Pose:
    """End-effector pose: rotation columns are the frame axes R1, R2, R3."""

    rotation: np.ndarray
    position: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _frozen_array(self.rotation, (3, 3)))
        object.__setattr__(self, "position", _frozen_array(self.position, (3,)))

    @classmethod
    def from_transform(cls, transform: Transform4) -> Pose:
        return cls(transform.rotation, transform.translation)

    def to_transform(self) -> Transform4:
        return Transform4(self.rotation, self.position)

    def is_valid(self, tol: float = SO3_TOL) -> bool:
        return is_rotation(self.rotation, tol) and bool(np.all(np.isfinite(self.position)))


@dataclass(frozen=True)
class RobotModel:
    """Geometry and joint ranges of the arm.

    The default values reproduce the published D-H table. ``l1`` keeps its
    table sign (-0.08 m, the shoulder sits below the base frame origin) and
    is used verbatim in every formula.
    """

    l1: float = -0.08
    l2: float = 0.045
    l3: float = 0.135
    d3_min: float = 0.33
    d3_max: float = 0.45
    theta1_range: tuple[float, float] = (-math.pi, math.pi)
    theta2_range: tuple[float, float] = (0.0, math.pi / 2)
    theta4_range: tuple[float, float] = (-math.pi, math.pi)
    theta5_range: tuple[float, float] = (0.0, math.pi)
    rows: tuple[DhRow, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.l2 > 0 and self.l3 > 0):
            raise ValueError("l2 and l3 must be positive")
        if not (0 < self.d3_min < self.d3_max):
            raise ValueError("need 0 < d3_min < d3_max")
        for name in ("theta1_range", "theta2_range", "theta4_range", "theta5_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must have lower < upper")
            object.__setattr__(self, name, (float(lo), float(hi)))
        half_pi = math.pi / 2
        rows = (
            DhRow(half_pi, 0.0, self.l1, None, JointKind.REVOLUTE),
            DhRow(half_pi, 0.0, 0.0, None, JointKind.REVOLUTE),
            DhRow(0.0, 0.0, None, math.pi, JointKind.PRISMATIC),
            DhRow(half_pi, 0.0, self.l2, None, JointKind.REVOLUTE),
            DhRow(half_pi, 0.0, 0.0, None, JointKind.REVOLUTE),
            DhRow(0.0, self.l3, 0.0, 0.0, JointKind.FIXED),
        )
        object.__setattr__(self, "rows", rows)

    @property
    def joint_bounds(self) -> np.ndarray:
        """``(5, 2)`` array of lower/upper bounds in chain order."""
        return np.array([self.theta1_range, self.theta2_range, (self.d3_min, self.d3_max),
                         self.theta4_range, self.theta5_range])

    @property
    def inner_radius(self) -> float:
        return self.d3_min + self.l2

    @property
    def outer_radius(self) -> float:
        return self.d3_max + self.l2 + self.l3

    def in_range(self, q, margin: float = 1e-9) -> np.ndarray:
        """Per-joint range membership.

        Open angular intervals are checked as closed intervals shrunk by
        ``margin``, except full-turn ranges (width 2*pi) which are closed:
        their endpoints describe the same angle. The prismatic range is
        closed as published.
        """
        q = np.asarray(q, dtype=float)
        bounds = self.joint_bounds
        shrink = np.full(5, margin)
        shrink[2] = 0.0
        full_turn = np.isclose(bounds[:, 1] - bounds[:, 0], 2 * math.pi)
        shrink[full_turn] = 0.0
        lo = bounds[:, 0] + shrink
        hi = bounds[:, 1] - shrink
        return (q >= lo) & (q <= hi)

    def contains(self, q, margin: float = 1e-9) -> bool:
        """True if every joint value of ``q`` lies within its range."""
        if isinstance(q, JointVector):
            q = q.as_array()
        return bool(np.all(self.in_range(q, margin)))

    def with_updates(self, **changes) -> RobotModel:
        return replace(self, **changes)


_CONFIG_LENGTHS = ("l1", "l2", "l3", "d3_min", "d3_max")
_CONFIG_RANGES = ("theta1", "theta2", "theta4", "theta5")


def load_model(path) -> RobotModel:
    """Read a robot model from a key/value file.

    Recognised keys: ``l1 l2 l3 d3_min d3_max`` (meters) and
    ``theta{1,2,4,5}_min`` / ``theta{1,2,4,5}_max`` (degrees). A section
    header is optional; missing keys keep their defaults.
    """
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError:
        parser.read_string("[robot]\n" + text)
    values = {}
    for section in parser.sections():
        values.update(parser[section])

    known = set(_CONFIG_LENGTHS) | {f"{j}_{b}" for j in _CONFIG_RANGES for b in ("min", "max")}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ValueError(f"unknown robot config keys: {', '.join(unknown)}")

    defaults = RobotModel()
    kwargs = {}
    for key in _CONFIG_LENGTHS:
        if key in values:
            kwargs[key] = float(values[key])
    for joint in _CONFIG_RANGES:
        lo, hi = getattr(defaults, f"{joint}_range")
        if f"{joint}_min" in values:
            lo = math.radians(float(values[f"{joint}_min"]))
        if f"{joint}_max" in values:
            hi = math.radians(float(values[f"{joint}_max"]))
        kwargs[f"{joint}_range"] = (lo, hi)
    return RobotModel(**kwargs)


def dump_model(model: RobotModel) -> str:
    """Serialise ``model`` in the format read by :func:`load_model`."""
    lines = ["[robot]"]
    for key in _CONFIG_LENGTHS:
        lines.append(f"{key} = {getattr(model, key)!r}")
    for joint in _CONFIG_RANGES:
        lo, hi = getattr(model, f"{joint}_range")
        lines.append(f"{joint}_min = {math.degrees(lo)!r}")
        lines.append(f"{joint}_max = {math.degrees(hi)!r}")
    return "\n".join(lines) + "\n"
