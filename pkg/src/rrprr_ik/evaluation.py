"""Monte-Carlo pose reconstruction study.

Targets are drawn in the hemispherical shell that bounds the workspace,
solved with the analytical IK, pushed back through FK, and the per-axis
position error and geodesic rotation error are aggregated over the
accepted samples.

Sampling is split into fixed-size blocks. Block ``b`` draws from its own
generator seeded by ``(seed, b)``, so the sample sequence does not depend
on how many worker processes run the blocks.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .ik import OK, Branch, FailureReason, IkOptions, solve_batch, status_name
from .kinematics import forward_kinematics_batch
from .metrics import PoseError, geodesic_angle
from .model import Pose, RobotModel

BLOCK_SIZE = 4096
EULER_CONVENTION = "intrinsic ZYX: R = Rz(yaw) @ Ry(pitch) @ Rx(roll)"
CSV_HEADER = ("px", "py", "pz", "yaw", "pitch", "roll", "status",
              "theta1", "theta2", "d3", "theta4", "theta5", "dx", "dy", "dz", "drot")
METRICS = ("dx", "dy", "dz", "drot")


@dataclass(frozen=True)
class ShellSpec:
    """Lower hemispherical shell centred on the shoulder point."""

    center: tuple[float, float, float]
    r_inner: float
    r_outer: float

    def __post_init__(self):
        if not 0 < self.r_inner < self.r_outer:
            raise ValueError("need 0 < r_inner < r_outer")

    @classmethod
    def from_model(cls, model: RobotModel) -> ShellSpec:
        return cls((0.0, 0.0, model.l1), model.inner_radius, model.outer_radius)

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float) - np.asarray(self.center)
        r = np.linalg.norm(p, axis=-1)
        return (r >= self.r_inner) & (r <= self.r_outer) & (p[..., 2] <= 0.0)

    def mean_radius(self) -> float:
        """Expected distance from the centre for a volume-uniform sample."""
        ri, ro = self.r_inner, self.r_outer
        return 0.75 * (ro ** 4 - ri ** 4) / (ro ** 3 - ri ** 3)

    def radius_std(self) -> float:
        ri, ro = self.r_inner, self.r_outer
        second = 0.6 * (ro ** 5 - ri ** 5) / (ro ** 3 - ri ** 3)
        return float(np.sqrt(second - self.mean_radius() ** 2))


def euler_ypr_to_matrix(yaw, pitch, roll) -> np.ndarray:
    """Rotation from yaw-pitch-roll angles (radians), ``Rz(yaw) Ry(pitch) Rx(roll)``.

    Accepts scalars or equal-length arrays; arrays give ``(n, 3, 3)``.
    """
    angles = np.stack(np.broadcast_arrays(yaw, pitch, roll), axis=-1).astype(float)
    return Rotation.from_euler("ZYX", angles).as_matrix()


def _sample_positions(rng: np.random.Generator, shell: ShellSpec, n: int) -> np.ndarray:
    c = np.asarray(shell.center)
    ro = shell.r_outer
    lo = c + np.array([-ro, -ro, -ro])
    hi = c + np.array([ro, ro, 0.0])
    out = np.empty((0, 3))
    while len(out) < n:
        need = n - len(out)
        draw = rng.uniform(lo, hi, size=(3 * need + 16, 3))
        out = np.concatenate([out, draw[shell.contains(draw)]])
    return out[:n]


def sample_poses(rng: np.random.Generator, shell: ShellSpec, n: int):
    """Draw ``n`` targets: positions by box rejection, orientations from uniform Euler angles.

    Returns ``(rotations, positions, euler)`` with shapes ``(n,3,3)``, ``(n,3)``, ``(n,3)``.
    """
    positions = _sample_positions(rng, shell, n)
    euler = rng.uniform([0.0, 0.0, 0.0], [2 * np.pi, np.pi, 2 * np.pi], size=(n, 3))
    rotations = euler_ypr_to_matrix(euler[:, 0], euler[:, 1], euler[:, 2]).reshape(n, 3, 3)
    return rotations, positions, euler


def sample_pose(rng: np.random.Generator, shell: ShellSpec) -> Pose:
    rot, pos, _ = sample_poses(rng, shell, 1)
    return Pose(rot[0], pos[0])


def sample_joints(rng: np.random.Generator, model: RobotModel, n: int,
                  margin: float = 1e-3, min_abs_theta4: float = 0.0) -> np.ndarray:
    """Uniform joint vectors inside the model ranges, ``margin`` away from every bound.

    With ``min_abs_theta4 > 0`` the wrist roll avoids a band around zero.
    """
    bounds = model.joint_bounds.copy()
    bounds[[0, 1, 3, 4], 0] += margin
    bounds[[0, 1, 3, 4], 1] -= margin
    q = rng.uniform(bounds[:, 0], bounds[:, 1], size=(n, 5))
    if min_abs_theta4 > 0:
        lo, hi = bounds[3]
        span = (hi - lo) - 2 * min_abs_theta4
        u = rng.uniform(0.0, span, size=n)
        neg = u < (-min_abs_theta4 - lo)
        q[:, 3] = np.where(neg, lo + u, lo + u + 2 * min_abs_theta4)
    return q


@dataclass
class SampleRecord:
    target: Pose
    status: int
    joints: np.ndarray | None = None
    error: PoseError | None = None

    def __post_init__(self):
        if (self.status == OK) != (self.error is not None):
            raise ValueError("a pose error is present exactly when the sample is accepted")

    @property
    def accepted(self) -> bool:
        return self.status == OK


@dataclass
class EvalReport:
    total_samples: int
    accepted_count: int
    mean: dict | None
    std: dict | None
    failures: dict = field(default_factory=dict)
    branches: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    elapsed_seconds: float | None = None

    @property
    def acceptance_fraction(self) -> float:
        return self.accepted_count / self.total_samples if self.total_samples else 0.0

    def body(self) -> dict:
        """Report contents without wall-clock timing."""
        d = asdict(self)
        d.pop("elapsed_seconds")
        d["acceptance_fraction"] = self.acceptance_fraction
        return d

    def to_json(self, timing: bool = True) -> str:
        d = self.body()
        if timing:
            d["elapsed_seconds"] = self.elapsed_seconds
        return json.dumps(d, indent=2, sort_keys=True)


def _stats(errors: np.ndarray):
    if len(errors) == 0:
        return None, None
    mean = errors.mean(axis=0)
    if len(errors) > 1:
        std = errors.std(axis=0, ddof=1)
    else:
        std = np.zeros(errors.shape[1])
    return ({k: float(v) for k, v in zip(METRICS, mean)},
            {k: float(v) for k, v in zip(METRICS, std)})


def summarize_errors(errors, status, branch=None, config=None) -> EvalReport:
    """Aggregate per-sample arrays: ``errors`` is ``(n_accepted, 4)`` in metric order."""
    errors = np.asarray(errors, dtype=float).reshape(-1, 4)
    status = np.asarray(status)
    mean, std = _stats(errors)
    failures = {FailureReason(c).name.lower(): int(np.sum(status == c))
                for c in map(int, np.unique(status)) if c != OK}
    branches = {}
    if branch is not None:
        branch = np.asarray(branch)
        ok = status == OK
        branches = {b.name.lower(): int(np.sum(ok & (branch == b))) for b in Branch}
    return EvalReport(total_samples=int(len(status)), accepted_count=int(np.sum(status == OK)),
                      mean=mean, std=std, failures=failures, branches=branches, config=config or {})


def summarize(records) -> EvalReport:
    """Mean and sample standard deviation of the errors over accepted records."""
    records = list(records)
    errors = [[r.error.dx, r.error.dy, r.error.dz, r.error.drot] for r in records if r.accepted]
    return summarize_errors(np.array(errors, dtype=float), [r.status for r in records])


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def _run_block(args):
    model, shell, seed, block, size, options, source = args
    rng = _block_rng(seed, block)
    if source == "joints":
        q = sample_joints(rng, model, size)
        rot, pos = forward_kinematics_batch(model, q)
        euler = Rotation.from_matrix(rot).as_euler("ZYX")
    else:
        rot, pos, euler = sample_poses(rng, shell, size)
    res = solve_batch(model, rot, pos, options)
    errors = np.full((size, 4), np.nan)
    ok = res.accepted
    if ok.any():
        fk_rot, fk_pos = forward_kinematics_batch(model, res.joints[ok])
        errors[ok, :3] = np.abs(pos[ok] - fk_pos)
        errors[ok, 3] = geodesic_angle(rot[ok], fk_rot)
    return pos, euler, res.status, res.branch, res.joints, errors


def _blocks(n: int):
    full, rest = divmod(n, BLOCK_SIZE)
    sizes = [BLOCK_SIZE] * full + ([rest] if rest else [])
    return list(enumerate(sizes))


def write_sample_csv(path, pos, euler, status, joints, errors):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for i in range(len(status)):
            row = [*pos[i], *euler[i]]
            fmt = [f"{v:.17g}" for v in row]
            fmt.append(status_name(int(status[i])))
            fmt.extend("" if np.isnan(v) else f"{v:.17g}" for v in (*joints[i], *errors[i]))
            w.writerow(fmt)


def run_evaluation(model: RobotModel, shell: ShellSpec | None = None, n: int = 10_000,
                   seed: int = 0, options: IkOptions | None = None, workers: int = 1,
                   csv_path=None, source: str = "shell") -> EvalReport:
    """Sample ``n`` targets, solve, reconstruct through FK and aggregate errors.

    ``source="joints"`` replaces free sampling with FK of random in-range
    joint vectors (every target is then exactly reachable).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if source not in ("shell", "joints"):
        raise ValueError("source must be 'shell' or 'joints'")
    shell = shell or ShellSpec.from_model(model)
    options = options or IkOptions()
    start = time.perf_counter()
    jobs = [(model, shell, seed, b, size, options, source) for b, size in _blocks(n)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, jobs))
    else:
        parts = [_run_block(job) for job in jobs]
    pos, euler, status, branch, joints, errors = (np.concatenate(x) for x in zip(*parts))

    if csv_path is not None:
        write_sample_csv(csv_path, pos, euler, status, joints, errors)

    config = {
        "seed": seed,
        "samples": n,
        "workers": workers,
        "source": source,
        "tolerances": asdict(options),
        "model": {k: v for k, v in asdict(model).items() if k != "rows"},
        "shell": asdict(shell),
        "euler_convention": EULER_CONVENTION,
        "hemisphere": "z <= shoulder height",
    }
    report = summarize_errors(errors[status == OK], status, branch, config)
    report.elapsed_seconds = time.perf_counter() - start
    return report
