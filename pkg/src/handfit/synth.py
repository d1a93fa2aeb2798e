"""Procedural synthetic rigs and pose/view/dataset sampling.

Generated rigs substitute for licensed hand-model constants so everything
runs offline: a seeded joint tree with hand-scale bone lengths, vertices
scattered around the bones, inverse-square distance-falloff skin weights,
small random blend shapes, a nearest-vertex joint regressor and a random
orthonormal pose basis.  Pose/shape sampling uses the training ranges
theta in [-2, 2]^Q and beta in [-0.03, 0.03]^S; views draw a uniform
rotation (via uniform quaternions), a translation in the central half of
the image and a log-uniform scale.

Dataset records are JSON lines:
    {id, beta[], theta[], rot[3], trans[2], scale,
     joints3d[[x,y,z]...], keypoints2d[[u,v,p]...]}
with joints3d in the camera frame (view-rotated, mm) so that
keypoints2d == scale * joints3d[:, :2] + trans exactly when sigma == 0.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import ViewParams, project
from .errors import ContractError
from .hand_model import HandParams, ModelConstants, pose_hand
from .rotation import quaternion_to_axis_angle, rodrigues
from .segmentation.masks import HandMask, mask_to_rle
from .segmentation.trimap import fill_triangle

THETA_RANGE = 2.0
BETA_RANGE = 0.03
DEFAULT_SCALE_RANGE = (0.5, 2.0)
DEFAULT_IMAGE_SIZE = 320

BONE_LENGTH_RANGE = (25.0, 50.0)  # mm, keeps rigs hand-sized
VERTEX_SCATTER_MM = 6.0
SHAPE_BLEND_MM = 5.0
POSE_BLEND_MM = 0.3
REGRESSOR_NEIGHBORS = 4
PALM_NEIGHBORS = 6


@dataclass
class RigSpec:
    n_joints: int = 16
    n_vertices: int = 120
    n_shape: int = 10
    n_pose: int = 10
    seed: int = 0
    n_faces: int | None = None  # default 2 * n_vertices - 4

    def __post_init__(self):
        if self.n_joints < 2:
            raise ContractError("a rig needs at least 2 joints")
        if self.n_vertices < self.n_joints:
            raise ContractError("a rig needs at least as many vertices as joints")


@dataclass
class SyntheticSample:
    sample_id: int
    params: HandParams
    view: ViewParams
    joints3d: np.ndarray    # camera frame, 21 x 3 mm
    keypoints2d: np.ndarray  # 21 x 2 px
    confidence: np.ndarray
    mask: HandMask | None = None

    def to_record(self) -> dict:
        kp = [[float(u), float(v), float(p)] for (u, v), p
              in zip(self.keypoints2d, self.confidence)]
        rec = {
            "id": self.sample_id,
            "beta": self.params.beta.tolist(),
            "theta": self.params.theta.tolist(),
            "rot": self.view.rot.tolist(),
            "trans": self.view.trans.tolist(),
            "scale": float(self.view.scale),
            "joints3d": self.joints3d.tolist(),
            "keypoints2d": kp,
        }
        if self.mask is not None:
            rec["mask"] = mask_to_rle(self.mask)
        return rec


def _hand_parent_table(n_joints: int, rng: np.random.Generator) -> np.ndarray:
    """5 chains of 3 off the root for the 16-joint layout, random tree otherwise."""
    parent = np.full(n_joints, -1, dtype=np.int64)
    if n_joints == 16:
        for f in range(5):
            base = 1 + 3 * f
            parent[base] = 0
            parent[base + 1] = base
            parent[base + 2] = base + 1
    else:
        for j in range(1, n_joints):
            parent[j] = int(rng.integers(0, j))
    return parent


def _segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each point to segment a-b."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    closest = a + t[:, None] * ab
    return np.linalg.norm(points - closest, axis=1)


def make_rig(spec: RigSpec, include_palm_center: bool = False) -> ModelConstants:
    """Deterministic synthetic ModelConstants for the given spec."""
    rng = np.random.default_rng(spec.seed)
    k, v = spec.n_joints, spec.n_vertices
    parent = _hand_parent_table(k, rng)

    joints = np.zeros((k, 3))
    for j in range(1, k):
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        length = rng.uniform(*BONE_LENGTH_RANGE)
        joints[j] = joints[parent[j]] + length * direction

    # Vertices scatter around randomly chosen bones (root counts as a point).
    bone_of = rng.integers(0, k, size=v)
    t = rng.uniform(0.0, 1.0, size=v)
    verts = np.empty((v, 3))
    for i in range(v):
        b = int(bone_of[i])
        if b == 0:
            anchor = joints[0]
        else:
            anchor = joints[parent[b]] + t[i] * (joints[b] - joints[parent[b]])
        verts[i] = anchor + rng.normal(scale=VERTEX_SCATTER_MM, size=3)

    # Inverse-square distance falloff to each joint's bone, sharpened for locality.
    dist = np.empty((v, k))
    for j in range(k):
        if j == 0:
            dist[:, 0] = np.linalg.norm(verts - joints[0], axis=1)
        else:
            dist[:, j] = _segment_distance(verts, joints[parent[j]], joints[j])
    raw = 1.0 / (dist ** 2 + 16.0) ** 2
    skin_weights = raw / raw.sum(axis=1, keepdims=True)

    # Joint regressor: uniform average of the nearest vertices to each joint.
    regressor = np.zeros((k, v))
    m = min(REGRESSOR_NEIGHBORS, v)
    for j in range(k):
        nearest = np.argsort(np.linalg.norm(verts - joints[j], axis=1),
                             kind="stable")[:m]
        regressor[j, nearest] = 1.0 / m

    shape_blend = rng.normal(scale=SHAPE_BLEND_MM, size=(spec.n_shape, v, 3))
    pose_blend = rng.normal(scale=POSE_BLEND_MM, size=(9 * k, v, 3))

    basis = rng.normal(size=(3 * (k - 1), spec.n_pose))
    q, _ = np.linalg.qr(basis)
    pose_basis = q[:, :spec.n_pose]
    pose_mean = np.zeros(3 * (k - 1))  # rest pose at zero coefficients

    # Fingertips: nearest vertices to the leaves farthest from the root.
    is_leaf = np.ones(k, dtype=bool)
    is_leaf[parent[parent >= 0]] = False
    leaves = np.flatnonzero(is_leaf)
    depth = np.linalg.norm(joints - joints[0], axis=1)
    leaves = leaves[np.argsort(-depth[leaves], kind="stable")]
    anchors = [joints[leaves[i % leaves.size]] for i in range(5)]
    taken: set[int] = set()
    tips = []
    for a in anchors:
        order = np.argsort(np.linalg.norm(verts - a, axis=1), kind="stable")
        pick = next((int(i) for i in order if int(i) not in taken), int(order[0]))
        taken.add(pick)
        tips.append(pick)

    palm = None
    if include_palm_center:
        near_root = np.argsort(np.linalg.norm(verts - joints[0], axis=1),
                               kind="stable")[:min(PALM_NEIGHBORS, v)]
        palm = np.zeros(v)
        palm[near_root] = 1.0 / near_root.size

    n_faces = spec.n_faces if spec.n_faces is not None else max(1, 2 * v - 4)
    faces = rng.integers(0, v, size=(n_faces, 3))

    return ModelConstants(
        template=verts,
        faces=faces,
        shape_blend=shape_blend,
        pose_blend=pose_blend,
        joint_regressor=regressor,
        skin_weights=skin_weights,
        parent=parent,
        pose_mean=pose_mean,
        pose_basis=pose_basis,
        fingertip_vertex_ids=np.array(tips, dtype=np.int64),
        palm_center_weights=palm,
    )


def sample_params(rng: np.random.Generator, n_shape: int = 10, n_pose: int = 10,
                  image_size: int = DEFAULT_IMAGE_SIZE,
                  scale_range: tuple[float, float] = DEFAULT_SCALE_RANGE
                  ) -> tuple[HandParams, ViewParams]:
    """Draw hand parameters from the training ranges and a random view."""
    theta = rng.uniform(-THETA_RANGE, THETA_RANGE, size=n_pose)
    beta = rng.uniform(-BETA_RANGE, BETA_RANGE, size=n_shape)
    # Uniform rotation: normalized 4D Gaussian is uniform on the quaternion sphere.
    quat = rng.normal(size=4)
    rot = quaternion_to_axis_angle(quat)
    trans = rng.uniform(0.25 * image_size, 0.75 * image_size, size=2)
    lo, hi = scale_range
    scale = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
    return HandParams(beta=beta, theta=theta), ViewParams(rot=rot, trans=trans,
                                                          scale=scale)


def _silhouette(constants: ModelConstants, vertices2d: np.ndarray,
                image_size: int) -> HandMask:
    """Rasterize the projected mesh faces with the shared scanline fill."""
    pixels = np.zeros((image_size, image_size), dtype=np.uint8)
    for tri in constants.faces:
        for x, y in fill_triangle(vertices2d[tri], image_size, image_size):
            pixels[y, x] = 1
    return HandMask(pixels)


def make_sample(constants: ModelConstants, sample_id: int, seed: int,
                sigma: float = 0.0, image_size: int = DEFAULT_IMAGE_SIZE,
                scale_range: tuple[float, float] = DEFAULT_SCALE_RANGE,
                with_mask: bool = False) -> SyntheticSample:
    """One sample from the per-index derived seed (seed XOR index)."""
    rng = np.random.default_rng(seed ^ sample_id)
    params, view = sample_params(rng, constants.n_shape, constants.n_pose,
                                 image_size, scale_range)
    posed = pose_hand(params, constants)
    joints = posed.joints[:constants.n_joints + 5]
    joints_cam = joints @ rodrigues(view.rot).T
    keypoints = project(joints, view).points
    conf = np.ones(joints.shape[0])
    if sigma > 0.0:
        noise = rng.normal(scale=sigma, size=keypoints.shape)
        keypoints = keypoints + noise
        conf = np.exp(-(noise ** 2).sum(axis=1) / (2.0 * sigma * sigma))
    mask = None
    if with_mask:
        verts2d = project(posed.vertices, view).points
        mask = _silhouette(constants, verts2d, image_size)
    return SyntheticSample(sample_id=sample_id, params=params, view=view,
                           joints3d=joints_cam, keypoints2d=keypoints,
                           confidence=conf, mask=mask)


def generate_dataset(constants: ModelConstants, n: int, seed: int,
                     out_path: str | Path | None, sigma: float = 0.0,
                     image_size: int = DEFAULT_IMAGE_SIZE,
                     scale_range: tuple[float, float] = DEFAULT_SCALE_RANGE,
                     with_masks: bool = False) -> list[SyntheticSample]:
    """Write n samples as JSON lines (if out_path given) and return them."""
    samples = [make_sample(constants, i, seed, sigma, image_size, scale_range,
                           with_masks) for i in range(n)]
    if out_path is not None:
        with open(out_path, "w") as fh:
            for s in samples:
                fh.write(json.dumps(s.to_record()))
                fh.write("\n")
    return samples
