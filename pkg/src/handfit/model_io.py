"""Model constants serialization and mesh export.

Binary model file (canonical), little-endian throughout:

    magic   "HMDL" (4 bytes)
    u32     version = 1
    u32 x 5 n_vertices, n_faces, n_joints, n_shape, n_pose
    then the ModelConstants tensors in declaration order:
        template, faces, shape_blend, pose_blend   dense f64 row-major
        joint_regressor                            sparse (see below)
        skin_weights                               dense f64
        parent                                     f64 (root sentinel -1)
        pose_mean, pose_basis                      dense f64
        fingertip_vertex_ids                       f64
        palm_center_weights                        sparse vector; count 0 = absent

Sparse matrix encoding: u64 entry count, then count x (u32 row, u32 col)
index pairs, then count x f64 values.  Sparse vectors drop the col index.
Index-valued tensors are stored as f64 (exact for indices < 2^53).

A JSON mirror (all tensors as nested lists) is provided for inspection;
round-tripping either format is lossless.
"""

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ModelLoadError
from .hand_model import ModelConstants

MAGIC = b"HMDL"
VERSION = 1


def _write_f64(fh, arr: np.ndarray):
    fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_f64(fh, shape: tuple[int, ...]) -> np.ndarray:
    n = int(np.prod(shape)) if shape else 1
    buf = fh.read(8 * n)
    if len(buf) != 8 * n:
        raise ModelLoadError("model file truncated")
    return np.frombuffer(buf, dtype="<f8").reshape(shape).copy()


def _write_sparse(fh, dense: np.ndarray):
    rows, cols = np.nonzero(dense)
    fh.write(struct.pack("<Q", rows.size))
    idx = np.empty(2 * rows.size, dtype="<u4")
    idx[0::2] = rows
    idx[1::2] = cols
    fh.write(idx.tobytes())
    _write_f64(fh, dense[rows, cols])


def _read_sparse(fh, shape: tuple[int, int]) -> np.ndarray:
    (count,) = struct.unpack("<Q", fh.read(8))
    idx = np.frombuffer(fh.read(8 * count), dtype="<u4").reshape(-1, 2)
    vals = _read_f64(fh, (count,))
    out = np.zeros(shape)
    out[idx[:, 0], idx[:, 1]] = vals
    return out


def _write_sparse_vector(fh, dense: np.ndarray | None):
    if dense is None:
        fh.write(struct.pack("<Q", 0))
        return
    ids = np.flatnonzero(dense)
    fh.write(struct.pack("<Q", ids.size))
    fh.write(ids.astype("<u4").tobytes())
    _write_f64(fh, dense[ids])


def _read_sparse_vector(fh, length: int) -> np.ndarray | None:
    (count,) = struct.unpack("<Q", fh.read(8))
    if count == 0:
        return None
    ids = np.frombuffer(fh.read(4 * count), dtype="<u4")
    vals = _read_f64(fh, (count,))
    out = np.zeros(length)
    out[ids] = vals
    return out


def save_model(constants: ModelConstants, path: str | Path):
    """Write the canonical binary model file."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<6I", VERSION, constants.n_vertices, constants.n_faces,
                             constants.n_joints, constants.n_shape, constants.n_pose))
        _write_f64(fh, constants.template)
        _write_f64(fh, constants.faces.astype(float))
        _write_f64(fh, constants.shape_blend)
        _write_f64(fh, constants.pose_blend)
        _write_sparse(fh, constants.joint_regressor)
        _write_f64(fh, constants.skin_weights)
        _write_f64(fh, constants.parent.astype(float))
        _write_f64(fh, constants.pose_mean)
        _write_f64(fh, constants.pose_basis)
        _write_f64(fh, constants.fingertip_vertex_ids.astype(float))
        _write_sparse_vector(fh, constants.palm_center_weights)


def load_model_binary(path: str | Path) -> ModelConstants:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ModelLoadError(f"{path}: not a model file (bad magic)")
        version, v, f, k, ns, nq = struct.unpack("<6I", fh.read(24))
        if version != VERSION:
            raise ModelLoadError(f"{path}: unsupported model version {version}")
        return ModelConstants(
            template=_read_f64(fh, (v, 3)),
            faces=_read_f64(fh, (f, 3)).astype(np.int64),
            shape_blend=_read_f64(fh, (ns, v, 3)),
            pose_blend=_read_f64(fh, (9 * k, v, 3)),
            joint_regressor=_read_sparse(fh, (k, v)),
            skin_weights=_read_f64(fh, (v, k)),
            parent=_read_f64(fh, (k,)).astype(np.int64),
            pose_mean=_read_f64(fh, (3 * (k - 1),)),
            pose_basis=_read_f64(fh, (3 * (k - 1), nq)),
            fingertip_vertex_ids=_read_f64(fh, (5,)).astype(np.int64),
            palm_center_weights=_read_sparse_vector(fh, v),
        )


def save_model_json(constants: ModelConstants, path: str | Path):
    """Write the human-inspectable JSON mirror (lossless)."""
    doc = {
        "format": "handfit-model",
        "version": VERSION,
        "n_vertices": constants.n_vertices,
        "n_faces": constants.n_faces,
        "n_joints": constants.n_joints,
        "n_shape": constants.n_shape,
        "n_pose": constants.n_pose,
        "template": constants.template.tolist(),
        "faces": constants.faces.tolist(),
        "shape_blend": constants.shape_blend.tolist(),
        "pose_blend": constants.pose_blend.tolist(),
        "joint_regressor": constants.joint_regressor.tolist(),
        "skin_weights": constants.skin_weights.tolist(),
        "parent": constants.parent.tolist(),
        "pose_mean": constants.pose_mean.tolist(),
        "pose_basis": constants.pose_basis.tolist(),
        "fingertip_vertex_ids": constants.fingertip_vertex_ids.tolist(),
        "palm_center_weights": (None if constants.palm_center_weights is None
                                else constants.palm_center_weights.tolist()),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model_json(path: str | Path) -> ModelConstants:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "handfit-model":
        raise ModelLoadError(f"{path}: not a model JSON mirror")
    palm = doc["palm_center_weights"]
    return ModelConstants(
        template=np.array(doc["template"], dtype=float),
        faces=np.array(doc["faces"], dtype=np.int64).reshape(-1, 3),
        shape_blend=np.array(doc["shape_blend"], dtype=float),
        pose_blend=np.array(doc["pose_blend"], dtype=float),
        joint_regressor=np.array(doc["joint_regressor"], dtype=float),
        skin_weights=np.array(doc["skin_weights"], dtype=float),
        parent=np.array(doc["parent"], dtype=np.int64),
        pose_mean=np.array(doc["pose_mean"], dtype=float),
        pose_basis=np.array(doc["pose_basis"], dtype=float),
        fingertip_vertex_ids=np.array(doc["fingertip_vertex_ids"], dtype=np.int64),
        palm_center_weights=None if palm is None else np.array(palm, dtype=float),
    )


def load_model(path: str | Path) -> ModelConstants:
    """Load a model from the binary format or its JSON mirror (sniffed)."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return load_model_binary(path)
    return load_model_json(path)


def write_obj(vertices: np.ndarray, faces: np.ndarray, path: str | Path):
    """Wavefront OBJ export: v records at 9 significant digits, 1-based f records."""
    with open(path, "w") as fh:
        for x, y, z in np.asarray(vertices, dtype=float):
            fh.write(f"v {x:.9g} {y:.9g} {z:.9g}\n")
        for a, b, c in np.asarray(faces, dtype=np.int64):
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


def read_obj(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Parse v/f records back into (vertices, 0-based faces)."""
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    return np.array(verts, dtype=float), np.array(faces, dtype=np.int64).reshape(-1, 3)
