import numpy as np
import pytest

from handfit.errors import ModelLoadError
from handfit.model_io import (load_model, load_model_binary, load_model_json,
                              read_obj, save_model, save_model_json, write_obj)
from handfit.synth import RigSpec, make_rig


def _assert_constants_equal(a, b):
    np.testing.assert_array_equal(a.template, b.template)
    np.testing.assert_array_equal(a.faces, b.faces)
    np.testing.assert_array_equal(a.shape_blend, b.shape_blend)
    np.testing.assert_array_equal(a.pose_blend, b.pose_blend)
    np.testing.assert_array_equal(a.joint_regressor, b.joint_regressor)
    np.testing.assert_array_equal(a.skin_weights, b.skin_weights)
    np.testing.assert_array_equal(a.parent, b.parent)
    np.testing.assert_array_equal(a.pose_mean, b.pose_mean)
    np.testing.assert_array_equal(a.pose_basis, b.pose_basis)
    np.testing.assert_array_equal(a.fingertip_vertex_ids, b.fingertip_vertex_ids)
    if a.palm_center_weights is None:
        assert b.palm_center_weights is None
    else:
        np.testing.assert_array_equal(a.palm_center_weights, b.palm_center_weights)


def test_binary_round_trip(tmp_path):
    rig = make_rig(RigSpec(n_joints=6, n_vertices=30, n_shape=4, n_pose=5, seed=3),
                   include_palm_center=True)
    path = tmp_path / "rig.hmdl"
    save_model(rig, path)
    _assert_constants_equal(rig, load_model_binary(path))


def test_binary_round_trip_without_palm(tmp_path):
    rig = make_rig(RigSpec(seed=5))
    path = tmp_path / "rig.hmdl"
    save_model(rig, path)
    loaded = load_model(path)
    assert loaded.palm_center_weights is None
    _assert_constants_equal(rig, loaded)


def test_json_mirror_round_trip(tmp_path):
    rig = make_rig(RigSpec(n_joints=4, n_vertices=12, n_shape=2, n_pose=3, seed=8),
                   include_palm_center=True)
    path = tmp_path / "rig.json"
    save_model_json(rig, path)
    _assert_constants_equal(rig, load_model_json(path))


def test_load_model_sniffs_format(tmp_path):
    rig = make_rig(RigSpec(n_joints=4, n_vertices=12, seed=1))
    bpath, jpath = tmp_path / "rig.bin", tmp_path / "rig.json"
    save_model(rig, bpath)
    save_model_json(rig, jpath)
    _assert_constants_equal(load_model(bpath), load_model(jpath))


def test_binary_then_json_then_binary_lossless(tmp_path):
    rig = make_rig(RigSpec(n_joints=5, n_vertices=20, seed=12))
    p1, p2, p3 = (tmp_path / n for n in ("a.hmdl", "b.json", "c.hmdl"))
    save_model(rig, p1)
    save_model_json(load_model(p1), p2)
    save_model(load_model(p2), p3)
    assert p1.read_bytes() == p3.read_bytes()


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.hmdl"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ModelLoadError):
        load_model_binary(path)


def test_truncated_file_rejected(tmp_path):
    rig = make_rig(RigSpec(n_joints=4, n_vertices=12, seed=1))
    path = tmp_path / "rig.hmdl"
    save_model(rig, path)
    data = path.read_bytes()
    path.write_bytes(data[:len(data) // 2])
    with pytest.raises(ModelLoadError):
        load_model_binary(path)


def test_obj_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    verts = rng.normal(scale=80.0, size=(50, 3))
    faces = rng.integers(0, 50, size=(40, 3))
    path = tmp_path / "mesh.obj"
    write_obj(verts, faces, path)
    rverts, rfaces = read_obj(path)
    # 9 significant digits of print precision
    np.testing.assert_allclose(rverts, verts, rtol=1e-8, atol=1e-12)
    np.testing.assert_array_equal(rfaces, faces)
    text = path.read_text()
    assert sum(1 for line in text.splitlines() if line.startswith("v ")) == 50
    assert sum(1 for line in text.splitlines() if line.startswith("f ")) == 40
