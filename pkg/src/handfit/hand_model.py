"""Articulated hand mesh model: blend shapes, skinning, joint regression.

The forward pass maps low-dimensional shape/pose coefficients to a posed
mesh and its keypoints:

    1. pose coefficients -> per-joint axis-angles (PCA decoding)
    2. template + shape displacements + pose-corrective displacements
    3. rest joints regressed from the *shape-deformed* template
       (before pose correctives)
    4. forward kinematics over the joint tree
    5. linear blend skinning of the deformed template
    6. keypoints = posed skeleton joints, then 5 fingertip mesh vertices,
       then (optionally) an interpolated palm-center point

All geometry is in model units, treated as millimetres.  The global rigid
rotation is NOT part of the pose vector; it belongs to the camera view, so
the root joint's local rotation is pinned to identity here.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ModelLoadError
from .rotation import rodrigues, rodrigues_jacobian

ROW_SUM_TOL = 1e-9


@dataclass
class ModelConstants:
    """All learned tensors of the hand model.  Immutable after construction.

    Shapes (V vertices, F faces, K joints, S shape dims, Q pose dims):
        template:           (V, 3)
        faces:              (F, 3) int vertex indices
        shape_blend:        (S, V, 3)
        pose_blend:         (9K, V, 3)
        joint_regressor:    (K, V), rows nonnegative, each summing to 1
        skin_weights:       (V, K), rows nonnegative, each summing to 1
        parent:             (K,) int, parent[0] == -1 (root sentinel)
        pose_mean:          (3(K-1),) axis-angle articulation mean
        pose_basis:         (3(K-1), Q) PCA components as columns
        fingertip_vertex_ids: (5,) int vertex indices, keypoints 16..20
        palm_center_weights: optional (V,) nonnegative, summing to 1
    """

    template: np.ndarray
    faces: np.ndarray
    shape_blend: np.ndarray
    pose_blend: np.ndarray
    joint_regressor: np.ndarray
    skin_weights: np.ndarray
    parent: np.ndarray
    pose_mean: np.ndarray
    pose_basis: np.ndarray
    fingertip_vertex_ids: np.ndarray
    palm_center_weights: np.ndarray | None = None
    _topo_order: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.template = np.ascontiguousarray(self.template, dtype=float)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        self.shape_blend = np.ascontiguousarray(self.shape_blend, dtype=float)
        self.pose_blend = np.ascontiguousarray(self.pose_blend, dtype=float)
        self.joint_regressor = np.ascontiguousarray(self.joint_regressor, dtype=float)
        self.skin_weights = np.ascontiguousarray(self.skin_weights, dtype=float)
        self.parent = np.ascontiguousarray(self.parent, dtype=np.int64)
        self.pose_mean = np.ascontiguousarray(self.pose_mean, dtype=float)
        self.pose_basis = np.ascontiguousarray(self.pose_basis, dtype=float)
        self.fingertip_vertex_ids = np.ascontiguousarray(
            self.fingertip_vertex_ids, dtype=np.int64)
        if self.palm_center_weights is not None:
            self.palm_center_weights = np.ascontiguousarray(
                self.palm_center_weights, dtype=float)
        self._validate()

    # -- derived counts ----------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return self.template.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    @property
    def n_joints(self) -> int:
        return self.joint_regressor.shape[0]

    @property
    def n_shape(self) -> int:
        return self.shape_blend.shape[0]

    @property
    def n_pose(self) -> int:
        return self.pose_basis.shape[1]

    # -- validation ---------------------------------------------------------
    def _validate(self):
        v, k = self.n_vertices, self.n_joints
        if self.template.ndim != 2 or self.template.shape[1] != 3:
            raise ModelLoadError(f"template must be V x 3, got {self.template.shape}")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ModelLoadError(f"faces must be F x 3, got {self.faces.shape}")
        if self.shape_blend.shape[1:] != (v, 3):
            raise ModelLoadError("shape_blend must be S x V x 3")
        if self.pose_blend.shape != (9 * k, v, 3):
            raise ModelLoadError(
                f"pose_blend must be 9K x V x 3, got {self.pose_blend.shape}")
        if self.joint_regressor.shape != (k, v):
            raise ModelLoadError("joint_regressor must be K x V")
        if self.skin_weights.shape != (v, k):
            raise ModelLoadError("skin_weights must be V x K")
        if self.parent.shape != (k,):
            raise ModelLoadError("parent must have length K")
        if self.pose_mean.shape != (3 * (k - 1),):
            raise ModelLoadError("pose_mean must have length 3(K-1)")
        if self.pose_basis.shape[0] != 3 * (k - 1):
            raise ModelLoadError("pose_basis must be 3(K-1) x Q")
        if self.fingertip_vertex_ids.shape != (5,):
            raise ModelLoadError("fingertip_vertex_ids must list 5 vertices")

        if (self.skin_weights < -ROW_SUM_TOL).any():
            raise ModelLoadError("skin_weights must be nonnegative")
        if (self.joint_regressor < -ROW_SUM_TOL).any():
            raise ModelLoadError("joint_regressor must be nonnegative")
        if np.abs(self.skin_weights.sum(axis=1) - 1.0).max() > ROW_SUM_TOL:
            raise ModelLoadError("skin_weights rows must sum to 1")
        if np.abs(self.joint_regressor.sum(axis=1) - 1.0).max() > ROW_SUM_TOL:
            raise ModelLoadError("joint_regressor rows must sum to 1")

        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= v):
            raise ModelLoadError("face indices out of range")
        if self.fingertip_vertex_ids.min() < 0 or self.fingertip_vertex_ids.max() >= v:
            raise ModelLoadError("fingertip vertex indices out of range")
        if self.palm_center_weights is not None:
            if self.palm_center_weights.shape != (v,):
                raise ModelLoadError("palm_center_weights must have length V")
            if (self.palm_center_weights < -ROW_SUM_TOL).any():
                raise ModelLoadError("palm_center_weights must be nonnegative")
            if abs(self.palm_center_weights.sum() - 1.0) > ROW_SUM_TOL:
                raise ModelLoadError("palm_center_weights must sum to 1")

        self._topo_order = self._topological_order()

    def _topological_order(self) -> np.ndarray:
        """BFS order over the joint tree; rejects cycles and multiple roots."""
        k = self.n_joints
        if self.parent[0] != -1:
            raise ModelLoadError("joint 0 must be the root (parent sentinel -1)")
        children: list[list[int]] = [[] for _ in range(k)]
        for j in range(1, k):
            p = int(self.parent[j])
            if not 0 <= p < k:
                raise ModelLoadError(f"parent of joint {j} out of range: {p}")
            children[p].append(j)
        order, queue = [], [0]
        while queue:
            j = queue.pop(0)
            order.append(j)
            queue.extend(children[j])
        if len(order) != k:
            raise ModelLoadError("parent table is not a tree rooted at joint 0")
        return np.asarray(order, dtype=np.int64)

    @property
    def n_keypoints(self) -> int:
        """Skeleton joints + fingertips (+ palm center if present)."""
        return self.n_joints + 5 + (1 if self.palm_center_weights is not None else 0)


@dataclass
class HandParams:
    """Shape (beta) and pose (theta) coefficient vectors."""

    beta: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float).reshape(-1)
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if not (np.isfinite(self.beta).all() and np.isfinite(self.theta).all()):
            raise ContractError("hand parameters must be finite")

    @classmethod
    def zeros(cls, n_shape: int = 10, n_pose: int = 10) -> "HandParams":
        return cls(np.zeros(n_shape), np.zeros(n_pose))


@dataclass
class PosedHand:
    """Forward-pass output: mesh vertices plus keypoints.

    joints rows: the K skeleton joints, then the 5 fingertip vertices
    (identical to the corresponding mesh vertices), then the palm center
    when the model defines one.
    """

    vertices: np.ndarray
    joints: np.ndarray


def decode_pose(theta: np.ndarray, constants: ModelConstants) -> np.ndarray:
    """Pose coefficients -> concatenated axis-angles of the K-1 articulation joints."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != constants.n_pose:
        raise ContractError(
            f"theta has {theta.shape[0]} coefficients, model expects {constants.n_pose}")
    return constants.pose_mean + constants.pose_basis @ theta


def _rotation_stack(theta_axis_angle: np.ndarray, constants: ModelConstants) -> np.ndarray:
    """Flattened rotation coefficients of all K joints, 9 per joint, row-major.

    Block 0 is the root, held at identity (global rotation lives in the view).
    """
    k = constants.n_joints
    aa = np.asarray(theta_axis_angle, dtype=float).reshape(-1)
    if aa.shape[0] != 3 * (k - 1):
        raise ContractError(
            f"axis-angle vector has length {aa.shape[0]}, expected {3 * (k - 1)}")
    stack = np.empty((k, 9))
    stack[0] = np.eye(3).ravel()
    for j in range(1, k):
        stack[j] = rodrigues(aa[3 * (j - 1):3 * j]).ravel()
    return stack.ravel()


def shape_template(beta: np.ndarray, constants: ModelConstants) -> np.ndarray:
    """Template plus shape displacements (no pose correctives)."""
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.shape[0] != constants.n_shape:
        raise ContractError(
            f"beta has {beta.shape[0]} coefficients, model expects {constants.n_shape}")
    return constants.template + np.einsum("n,nvc->vc", beta, constants.shape_blend)


def deform_template(beta: np.ndarray, theta_axis_angle: np.ndarray,
                    constants: ModelConstants) -> np.ndarray:
    """Template + shape blend shapes + pose-corrective blend shapes.

    The corrective term contracts (R(theta) - R(rest)) rotation coefficients
    of all K joints against the 9K pose displacement fields; at the rest pose
    (all-zero axis-angles) it vanishes, leaving template + shape terms only.
    """
    v = shape_template(beta, constants)
    delta = _rotation_stack(theta_axis_angle, constants) - np.tile(np.eye(3).ravel(),
                                                                   constants.n_joints)
    return v + np.einsum("q,qvc->vc", delta, constants.pose_blend)


def regress_joints(vertices: np.ndarray, constants: ModelConstants) -> np.ndarray:
    """K x 3 joint locations as sparse convex combinations of mesh vertices."""
    return constants.joint_regressor @ vertices


def forward_kinematics(theta_axis_angle: np.ndarray, rest_joints: np.ndarray,
                       constants: ModelConstants) -> tuple[np.ndarray, np.ndarray]:
    """World-frame rigid transform per joint.

    Each joint rotates about its rest location by its local axis-angle and
    inherits its parent's transform; the root stays at identity.  Returns
    (rotations (K,3,3), translations (K,3)) so that a rest-frame point x
    attached to joint k maps to ``rotations[k] @ x + translations[k]``.
    """
    k = constants.n_joints
    aa = np.asarray(theta_axis_angle, dtype=float).reshape(-1)
    rest = np.asarray(rest_joints, dtype=float)
    if rest.shape != (k, 3):
        raise ContractError(f"rest_joints must be K x 3, got {rest.shape}")
    rot = np.empty((k, 3, 3))
    trans = np.empty((k, 3))
    for j in constants._topo_order:
        if j == 0:
            rot[0] = np.eye(3)
            trans[0] = 0.0
            continue
        p = int(constants.parent[j])
        r_local = rodrigues(aa[3 * (j - 1):3 * j])
        jj = rest[j]
        rot[j] = rot[p] @ r_local
        trans[j] = rot[p] @ (jj - r_local @ jj) + trans[p]
    return rot, trans


def skin(template_deformed: np.ndarray, transforms: tuple[np.ndarray, np.ndarray],
         constants: ModelConstants) -> np.ndarray:
    """Linear blend skinning: weighted sum of rigidly transformed vertices."""
    rot, trans = transforms
    per_joint = np.einsum("kab,vb->kva", rot, template_deformed) + trans[:, None, :]
    return np.einsum("vk,kvc->vc", constants.skin_weights, per_joint)


def pose_hand(params: HandParams, constants: ModelConstants) -> PosedHand:
    """Full forward pass from (beta, theta) to mesh vertices and keypoints."""
    aa = decode_pose(params.theta, constants)
    v_shaped = shape_template(params.beta, constants)
    rest_joints = regress_joints(v_shaped, constants)
    v_deformed = deform_template(params.beta, aa, constants)
    transforms = forward_kinematics(aa, rest_joints, constants)
    vertices = skin(v_deformed, transforms, constants)

    rot, trans = transforms
    skeleton = np.einsum("kab,kb->ka", rot, rest_joints) + trans
    rows = [skeleton, vertices[constants.fingertip_vertex_ids]]
    if constants.palm_center_weights is not None:
        rows.append(constants.palm_center_weights @ vertices)
    joints = np.vstack([np.atleast_2d(r) for r in rows])
    return PosedHand(vertices=vertices, joints=joints)


def pose_hand_jacobian(params: HandParams, constants: ModelConstants) -> np.ndarray:
    """Jacobian of all keypoint coordinates w.r.t. (beta, theta).

    Returns a (3 * n_keypoints) x (n_shape + n_pose) matrix; rows are
    keypoint-major (kp0_x, kp0_y, kp0_z, kp1_x, ...) in the same keypoint
    order as ``pose_hand``, columns are beta then theta.  Computed by exact
    chain-rule propagation through decoding, blend shapes, kinematics and
    skinning (validated against central finite differences in the tests).
    """
    k = constants.n_joints
    ns, nq = constants.n_shape, constants.n_pose
    npar = ns + nq
    beta = np.asarray(params.beta, dtype=float).reshape(-1)
    theta = np.asarray(params.theta, dtype=float).reshape(-1)
    if beta.shape[0] != ns or theta.shape[0] != nq:
        raise ContractError("parameter dimensions do not match the model")

    aa = constants.pose_mean + constants.pose_basis @ theta

    # Local rotations and their derivatives w.r.t. theta (beta block is zero).
    r_local = np.empty((k, 3, 3))
    dr_local = np.zeros((k, 3, 3, npar))
    r_local[0] = np.eye(3)
    for j in range(1, k):
        w = aa[3 * (j - 1):3 * j]
        r_local[j] = rodrigues(w)
        dr_dw = rodrigues_jacobian(w)  # (3, 3, 3), index 0 is the w component
        dr_local[j, :, :, ns:] = np.einsum(
            "mab,mq->abq", dr_dw, constants.pose_basis[3 * (j - 1):3 * j, :])

    # Rest joints and their beta sensitivity (regression happens pre-correctives).
    v_shaped = shape_template(beta, constants)
    rest = constants.joint_regressor @ v_shaped
    dj = np.zeros((k, 3, npar))
    dj[:, :, :ns] = np.einsum("kv,nvc->kcn", constants.joint_regressor,
                              constants.shape_blend)

    # Propagate global transforms and their derivatives down the tree.
    rot = np.empty((k, 3, 3))
    trans = np.empty((k, 3))
    drot = np.zeros((k, 3, 3, npar))
    dtrans = np.zeros((k, 3, npar))
    for j in constants._topo_order:
        if j == 0:
            rot[0] = np.eye(3)
            trans[0] = 0.0
            continue
        p = int(constants.parent[j])
        rl, drl = r_local[j], dr_local[j]
        jj, djj = rest[j], dj[j]
        rot[j] = rot[p] @ rl
        drot[j] = np.einsum("abq,bc->acq", drot[p], rl) + np.einsum(
            "ab,bcq->acq", rot[p], drl)
        c = jj - rl @ jj
        dc = djj - np.einsum("abq,b->aq", drl, jj) - rl @ djj
        trans[j] = rot[p] @ c + trans[p]
        dtrans[j] = np.einsum("abq,b->aq", drot[p], c) + rot[p] @ dc + dtrans[p]

    # Skeleton keypoints: x_k = rot_k @ rest_k + trans_k.
    djoints = (np.einsum("kabq,kb->kaq", drot, rest)
               + np.einsum("kab,kbq->kaq", rot, dj) + dtrans)

    # Mesh-borne keypoints need skinned-vertex derivatives; restrict the
    # computation to the vertices that actually feed a keypoint.
    need = list(constants.fingertip_vertex_ids)
    palm_support = np.array([], dtype=np.int64)
    if constants.palm_center_weights is not None:
        palm_support = np.flatnonzero(constants.palm_center_weights)
        need.extend(palm_support)
    vid = np.unique(np.asarray(need, dtype=np.int64))
    where = {int(i): n for n, i in enumerate(vid)}

    delta = r_local.reshape(k * 9) - np.tile(np.eye(3).ravel(), k)
    v_sub = v_shaped[vid] + np.einsum("q,qvc->vc", delta, constants.pose_blend[:, vid, :])
    dv_sub = np.zeros((vid.size, 3, npar))
    dv_sub[:, :, :ns] = np.transpose(constants.shape_blend[:, vid, :], (1, 2, 0))
    # Corrective term: d(delta)/dtheta contracted with the pose displacement fields.
    ddelta = dr_local.reshape(k * 9, npar)
    dv_sub += np.einsum("qp,qvc->vcp", ddelta, constants.pose_blend[:, vid, :])

    w_sub = constants.skin_weights[vid]  # (|vid|, K)
    dskinned = (np.einsum("vk,kabq,vb->vaq", w_sub, drot, v_sub)
                + np.einsum("vk,kab,vbq->vaq", w_sub, rot, dv_sub)
                + np.einsum("vk,kaq->vaq", w_sub, dtrans))

    blocks = [djoints.reshape(3 * k, npar)]
    tip_rows = [where[int(i)] for i in constants.fingertip_vertex_ids]
    blocks.append(dskinned[tip_rows].reshape(15, npar))
    if constants.palm_center_weights is not None:
        pw = constants.palm_center_weights[palm_support]
        palm = np.einsum("v,vaq->aq", pw, dskinned[[where[int(i)] for i in palm_support]])
        blocks.append(palm.reshape(3, npar))
    return np.vstack(blocks)
