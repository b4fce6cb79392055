"""CSV batch processing of pose and joint records.

Pose files carry a header and either Euler columns
``px,py,pz,yaw,pitch,roll`` or a full rotation ``px,py,pz,r11,...,r33``
(row-major). Joint files use ``theta1,theta2,d3,theta4,theta5``. Angles are
radians, lengths meters; numbers are written with 17 significant digits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .evaluation import euler_ypr_to_matrix
from .ik import IkOptions, solve_batch, status_name
from .kinematics import forward_kinematics_batch
from .model import Pose, RobotModel, is_rotation
from .refine import RefineParams, conditioning, project_to_range, refine

EULER_COLUMNS = ("px", "py", "pz", "yaw", "pitch", "roll")
MATRIX_COLUMNS = ("px", "py", "pz", *(f"r{i}{j}" for i in range(1, 4) for j in range(1, 4)))
JOINT_COLUMNS = ("theta1", "theta2", "d3", "theta4", "theta5")
SOLVE_COLUMNS = ("line", "status", "branch", *JOINT_COLUMNS,
                 "wrist_residual", "base_residual", "position_residual", "rotation_residual")
REFINE_COLUMNS = ("line", "analytic_status", *JOINT_COLUMNS, "position_residual",
                  "rotation_residual", "iterations", "converged", "jacobian_condition")
POSE_OUT_COLUMNS = MATRIX_COLUMNS


class RecordError(ValueError):
    """A malformed input row; ``line`` is 1-based and counts the header."""

    def __init__(self, line: int, field: str, message: str):
        self.line = line
        self.field = field
        super().__init__(f"line {line}, field {field!r}: {message}")


@dataclass
class PoseRecords:
    lines: list[int]
    rotations: np.ndarray
    positions: np.ndarray

    def __len__(self):
        return len(self.lines)

    def pose(self, i: int) -> Pose:
        return Pose(self.rotations[i], self.positions[i])


def _fmt(value) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ""
    return f"{value:.17g}"


def _read_rows(fh, required_sets):
    reader = csv.reader(fh)
    header = None
    rows = []
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        if header is None:
            header = [c.strip() for c in row]
            continue
        rows.append((reader.line_num, row))
    if header is None:
        return None, []
    for columns in required_sets:
        if all(c in header for c in columns):
            return columns, [(ln, {h: v.strip() for h, v in zip(header, row)}, len(row) == len(header))
                             for ln, row in rows]
    raise RecordError(1, header[0] if header else "", "header must contain one of: "
                      + " | ".join(",".join(c) for c in required_sets))


def _parse_floats(line, values, columns, complete):
    out = []
    for c in columns:
        raw = values.get(c)
        if raw is None or raw == "":
            raise RecordError(line, c, "missing value" if complete else "row has too few fields")
        try:
            x = float(raw)
        except ValueError:
            raise RecordError(line, c, f"not a number: {raw!r}") from None
        if not np.isfinite(x):
            raise RecordError(line, c, f"not finite: {raw!r}")
        out.append(x)
    return out


def read_poses(fh) -> PoseRecords:
    """Parse a pose CSV; raises :class:`RecordError` naming the line and field."""
    columns, rows = _read_rows(fh, (MATRIX_COLUMNS, EULER_COLUMNS))
    lines, rots, poss = [], [], []
    for line, values, complete in rows:
        nums = _parse_floats(line, values, columns, complete)
        if columns == EULER_COLUMNS:
            rot = euler_ypr_to_matrix(*nums[3:])
        else:
            rot = np.array(nums[3:]).reshape(3, 3)
            if not is_rotation(rot, 1e-6):
                raise RecordError(line, "r11", "rotation block is not in SO(3)")
        lines.append(line)
        rots.append(rot)
        poss.append(nums[:3])
    return PoseRecords(lines, np.array(rots).reshape(-1, 3, 3), np.array(poss).reshape(-1, 3))


def read_joints(fh) -> tuple[list[int], np.ndarray]:
    columns, rows = _read_rows(fh, (JOINT_COLUMNS,))
    lines, qs = [], []
    for line, values, complete in rows:
        qs.append(_parse_floats(line, values, columns, complete))
        lines.append(line)
    return lines, np.array(qs).reshape(-1, 5)


def write_poses(fh, rotations, positions):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(POSE_OUT_COLUMNS)
    for rot, pos in zip(rotations, positions):
        w.writerow([_fmt(v) for v in (*pos, *np.asarray(rot).reshape(9))])


def batch_fk(model: RobotModel, fh_in, fh_out) -> int:
    lines, q = read_joints(fh_in)
    rot, pos = forward_kinematics_batch(model, q)
    write_poses(fh_out, rot.reshape(-1, 3, 3), pos.reshape(-1, 3))
    return len(lines)


def batch_solve(model: RobotModel, fh_in, fh_out, options: IkOptions | None = None) -> int:
    """Solve every pose in ``fh_in``; one output row per input row.

    Failed rows keep whatever joint values were computed before the
    failing step, so boundary cases remain inspectable.
    """
    records = read_poses(fh_in)
    w = csv.writer(fh_out, lineterminator="\n")
    w.writerow(SOLVE_COLUMNS)
    if not len(records):
        return 0
    res = solve_batch(model, records.rotations, records.positions, options)
    for i, line in enumerate(records.lines):
        w.writerow([line, status_name(int(res.status[i])), int(res.branch[i]),
                    *(_fmt(float(v)) for v in res.joints[i]),
                    *(_fmt(float(v)) for v in res.residuals[i]),
                    _fmt(float(res.position_error[i])), _fmt(float(res.rotation_error[i]))])
    return len(records)


def batch_refine(model: RobotModel, fh_in, fh_out, options: IkOptions | None = None,
                 params: RefineParams | None = None) -> int:
    """Analytical solve followed by damped least-squares refinement of every row.

    Joint values the analytical pass could not produce start from the
    middle of their range.
    """
    records = read_poses(fh_in)
    w = csv.writer(fh_out, lineterminator="\n")
    w.writerow(REFINE_COLUMNS)
    if not len(records):
        return 0
    res = solve_batch(model, records.rotations, records.positions, options)
    mid = model.joint_bounds.mean(axis=1)
    for i, line in enumerate(records.lines):
        q0 = np.where(np.isfinite(res.joints[i]), res.joints[i], mid)
        out = refine(model, records.pose(i), project_to_range(model, q0), params)
        cond = conditioning(model, out.joints)["condition_number"]
        w.writerow([line, status_name(int(res.status[i])), *(_fmt(v) for v in out.joints.as_array()),
                    _fmt(out.position_residual), _fmt(out.rotation_residual),
                    out.iterations, int(out.converged), _fmt(cond)])
    return len(records)
