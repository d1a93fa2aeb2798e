import numpy as np
import pytest

from handfit.hand_model import ModelConstants


def build_constants(template, parent, skin_weights, joint_regressor,
                    shape_blend=None, pose_blend=None, pose_basis=None,
                    pose_mean=None, fingertips=None, faces=None, palm=None):
    """ModelConstants with sane defaults for hand-built test rigs."""
    template = np.asarray(template, dtype=float)
    parent = np.asarray(parent, dtype=np.int64)
    v = template.shape[0]
    k = parent.shape[0]
    if shape_blend is None:
        shape_blend = np.zeros((2, v, 3))
    if pose_blend is None:
        pose_blend = np.zeros((9 * k, v, 3))
    nq = pose_basis.shape[1] if pose_basis is not None else 2
    if pose_basis is None:
        pose_basis = np.zeros((3 * (k - 1), nq))
        for i in range(min(3 * (k - 1), nq)):
            pose_basis[i, i] = 1.0
    if pose_mean is None:
        pose_mean = np.zeros(3 * (k - 1))
    if fingertips is None:
        fingertips = np.arange(5) % v
    if faces is None:
        faces = np.array([[0, 1 % v, 2 % v]])
    return ModelConstants(
        template=template,
        faces=faces,
        shape_blend=np.asarray(shape_blend, dtype=float),
        pose_blend=np.asarray(pose_blend, dtype=float),
        joint_regressor=np.asarray(joint_regressor, dtype=float),
        skin_weights=np.asarray(skin_weights, dtype=float),
        parent=parent,
        pose_mean=np.asarray(pose_mean, dtype=float),
        pose_basis=np.asarray(pose_basis, dtype=float),
        fingertip_vertex_ids=np.asarray(fingertips, dtype=np.int64),
        palm_center_weights=palm,
    )


@pytest.fixture
def two_joint_rig():
    """Root at origin, child joint at (1, 0, 0); vertices pinned to joints."""
    template = np.array([
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [2.0, 0.0, 0.0],
        [0.5, 0.5, 0.0],
        [1.5, -0.5, 0.0],
    ])
    parent = [-1, 0]
    skin = np.array([
        [1.0, 0.0],
        [0.0, 1.0],
        [0.0, 1.0],
        [1.0, 0.0],
        [0.0, 1.0],
    ])
    regressor = np.zeros((2, 5))
    regressor[0, 0] = 1.0
    regressor[1, 1] = 1.0
    return build_constants(template, parent, skin, regressor,
                           pose_basis=np.eye(3))
