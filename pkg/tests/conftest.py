import math

import numpy as np
import pytest
from hypothesis import strategies as st

from rrprr_ik.model import JointVector, RobotModel


@pytest.fixture
def model():
    return RobotModel()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1.0]])


def rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0, 0], [s, c, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1.0]])


def trans(x, y, z):
    m = np.eye(4)
    m[:3, 3] = (x, y, z)
    return m


def dh_oracle(alpha, a, d, theta):
    """Standard D-H transform composed from elementary motions."""
    return rot_z(theta) @ trans(0, 0, d) @ trans(a, 0, 0) @ rot_x(alpha)


def fk_oracle(model, q):
    """End-effector transform built only from the published table and elementary motions."""
    t1, t2, d3, t4, t5 = q
    half = math.pi / 2
    table = [(half, 0, model.l1, t1), (half, 0, 0, t2), (0, 0, d3, math.pi),
             (half, 0, model.l2, t4), (half, 0, 0, t5), (0, model.l3, 0, 0)]
    m = np.eye(4)
    for row in table:
        m = m @ dh_oracle(*row)
    return m


angles = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)


@st.composite
def any_joints(draw):
    return JointVector(draw(angles), draw(angles), draw(st.floats(-1.0, 1.0)), draw(angles), draw(angles))


@st.composite
def reachable_joints(draw, margin=1e-3, min_abs_theta4=0.05, theta4=None):
    m = RobotModel()
    t1 = draw(st.floats(-math.pi + margin, math.pi - margin))
    t2 = draw(st.floats(margin, math.pi / 2 - margin))
    d3 = draw(st.floats(m.d3_min, m.d3_max))
    if theta4 is None:
        mag = draw(st.floats(min_abs_theta4, math.pi - margin))
        t4 = mag if draw(st.booleans()) else -mag
    else:
        t4 = theta4
    t5 = draw(st.floats(margin, math.pi - margin))
    return JointVector(t1, t2, d3, t4, t5)


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])
