"""Random instances shared by the test modules."""

import numpy as np

from dqcalib import quat as Q
from dqcalib.dual import DualQuaternion, Pose, pose_to_dq


def random_quat(rng, scale=1.0):
    return scale * rng.standard_normal(4)


def random_rotation(rng):
    return Q.quat_to_rotation(Q.random_unit(rng))


def random_pose(rng, t_scale=1.0):
    return Pose(random_rotation(rng), t_scale * rng.uniform(-1.0, 1.0, 3))


def random_unit_dq(rng, t_scale=1.0):
    return pose_to_dq(random_pose(rng, t_scale))


def random_dq(rng):
    return DualQuaternion(rng.standard_normal(4), rng.standard_normal(4))


def rotation_angle(R1, R2):
    c = (np.trace(R1.T @ R2) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))
