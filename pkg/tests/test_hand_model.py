import numpy as np
import pytest

from handfit.errors import ContractError, ModelLoadError
from handfit.hand_model import (HandParams, ModelConstants, decode_pose,
                                deform_template, forward_kinematics, pose_hand,
                                pose_hand_jacobian, regress_joints, skin)
from handfit.synth import RigSpec, make_rig

from conftest import build_constants


# ---- independent straight-line reference (quaternion rotations, 4x4 FK) ----

def _oracle_rot(w):
    angle = float(np.linalg.norm(w))
    if angle < 1e-300:
        return np.eye(3)
    axis = np.asarray(w) / angle
    c, s = np.cos(angle / 2.0), np.sin(angle / 2.0)
    qw, qx, qy, qz = c, s * axis[0], s * axis[1], s * axis[2]
    return np.array([
        [1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qw * qz), 2 * (qx * qz + qw * qy)],
        [2 * (qx * qy + qw * qz), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qw * qx)],
        [2 * (qx * qz - qw * qy), 2 * (qy * qz + qw * qx), 1 - 2 * (qx * qx + qy * qy)],
    ])


def oracle_pose_hand(beta, theta, c: ModelConstants):
    """From-scratch forward pass: explicit loops, homogeneous transforms."""
    k, v = c.n_joints, c.n_vertices
    aa = c.pose_mean + sum(theta[j] * c.pose_basis[:, j] for j in range(c.n_pose))

    shaped = c.template.copy()
    for n in range(c.n_shape):
        shaped = shaped + beta[n] * c.shape_blend[n]

    rest = np.zeros((k, 3))
    for j in range(k):
        for i in range(v):
            rest[j] += c.joint_regressor[j, i] * shaped[i]

    rots = [np.eye(3)] + [_oracle_rot(aa[3 * (j - 1):3 * j]) for j in range(1, k)]
    stack = np.concatenate([r.ravel() for r in rots])
    rest_stack = np.concatenate([np.eye(3).ravel()] * k)
    deformed = shaped.copy()
    for n in range(9 * k):
        deformed = deformed + (stack[n] - rest_stack[n]) * c.pose_blend[n]

    mats = [None] * k
    for j in np.asarray(c._topo_order):
        if j == 0:
            mats[0] = np.eye(4)
            continue
        local = np.eye(4)
        local[:3, :3] = rots[j]
        local[:3, 3] = rest[j] - rots[j] @ rest[j]
        mats[j] = mats[int(c.parent[j])] @ local

    verts = np.zeros((v, 3))
    for i in range(v):
        hv = np.concatenate([deformed[i], [1.0]])
        acc = np.zeros(4)
        for j in range(k):
            acc += c.skin_weights[i, j] * (mats[j] @ hv)
        verts[i] = acc[:3]

    joints = np.zeros((k, 3))
    for j in range(k):
        joints[j] = (mats[j] @ np.concatenate([rest[j], [1.0]]))[:3]
    rows = [joints, verts[c.fingertip_vertex_ids]]
    if c.palm_center_weights is not None:
        rows.append(c.palm_center_weights @ verts)
    return verts, np.vstack([np.atleast_2d(r) for r in rows])


class TestDecodePose:
    def test_zero_theta_returns_mean(self):
        rng = np.random.default_rng(0)
        mean = rng.normal(size=3)
        c = build_constants(np.zeros((5, 3)) + rng.normal(size=(5, 3)),
                            [-1, 0], np.tile([0.5, 0.5], (5, 1)),
                            np.tile([0.2] * 5, (2, 1)),
                            pose_mean=mean, pose_basis=np.eye(3))
        np.testing.assert_array_equal(decode_pose(np.zeros(3), c), mean)

    def test_identity_basis_selects_component(self, two_joint_rig):
        out = decode_pose(np.array([1.0, 0.0, 0.0]), two_joint_rig)
        np.testing.assert_array_equal(out, [1.0, 0.0, 0.0])

    def test_matches_dense_matvec_oracle(self):
        rng = np.random.default_rng(1)
        k, nq = 4, 6
        basis = rng.normal(size=(3 * (k - 1), nq))
        mean = rng.normal(size=3 * (k - 1))
        c = build_constants(rng.normal(size=(6, 3)), [-1, 0, 1, 2],
                            np.tile([0.25] * 4, (6, 1)),
                            np.tile([1 / 6] * 6, (4, 1)),
                            pose_mean=mean, pose_basis=basis)
        theta = rng.normal(size=nq)
        expected = mean.copy()
        for row in range(3 * (k - 1)):
            for col in range(nq):
                expected[row] += basis[row, col] * theta[col]
        np.testing.assert_allclose(decode_pose(theta, c), expected, atol=1e-12)

    def test_dimension_mismatch_raises(self, two_joint_rig):
        with pytest.raises(ContractError):
            decode_pose(np.zeros(4), two_joint_rig)


class TestDeformTemplate:
    def test_rest_pose_returns_template_regardless_of_pose_blend(self):
        rng = np.random.default_rng(2)
        template = rng.normal(size=(5, 3))
        c = build_constants(template, [-1, 0], np.tile([0.5, 0.5], (5, 1)),
                            np.tile([0.2] * 5, (2, 1)),
                            pose_blend=rng.normal(size=(18, 5, 3)),
                            pose_basis=np.eye(3))
        out = deform_template(np.zeros(2), np.zeros(3), c)
        np.testing.assert_array_equal(out, template)

    def test_rest_pose_is_shape_term_only_regardless_of_pose_blend(self):
        # convention pin: at the rest pose the corrective term vanishes even
        # with nonzero shape coefficients and arbitrary pose displacement data
        rng = np.random.default_rng(12)
        template = rng.normal(size=(5, 3))
        sb = rng.normal(size=(2, 5, 3))
        c = build_constants(template, [-1, 0], np.tile([0.5, 0.5], (5, 1)),
                            np.tile([0.2] * 5, (2, 1)), shape_blend=sb,
                            pose_blend=rng.normal(size=(18, 5, 3)),
                            pose_basis=np.eye(3))
        beta = rng.uniform(-0.03, 0.03, 2)
        out = deform_template(beta, np.zeros(3), c)
        np.testing.assert_allclose(out, template + beta[0] * sb[0]
                                   + beta[1] * sb[1], atol=1e-15)

    def test_shape_linearity(self):
        rng = np.random.default_rng(3)
        template = rng.normal(size=(5, 3))
        sb = rng.normal(size=(2, 5, 3))
        c = build_constants(template, [-1, 0], np.tile([0.5, 0.5], (5, 1)),
                            np.tile([0.2] * 5, (2, 1)), shape_blend=sb,
                            pose_basis=np.eye(3))
        out = deform_template(np.array([0.03, 0.0]), np.zeros(3), c)
        np.testing.assert_allclose(out, template + 0.03 * sb[0], atol=1e-15)

    def test_quarter_turn_corrective_matches_term_loop(self):
        rng = np.random.default_rng(4)
        template = rng.normal(size=(4, 3))
        pb = rng.normal(size=(18, 4, 3))
        c = build_constants(template, [-1, 0], np.tile([0.5, 0.5], (4, 1)),
                            np.tile([0.25] * 4, (2, 1)), pose_blend=pb,
                            pose_basis=np.eye(3))
        aa = np.array([0.0, 0.0, np.pi / 2])
        out = deform_template(np.zeros(2), aa, c)

        r = _oracle_rot(aa)
        stack = np.concatenate([np.eye(3).ravel(), r.ravel()])
        rest = np.concatenate([np.eye(3).ravel(), np.eye(3).ravel()])
        expected = template.copy()
        for n in range(18):
            expected = expected + (stack[n] - rest[n]) * pb[n]
        np.testing.assert_allclose(out, expected, atol=1e-12)


class TestForwardKinematics:
    def test_rest_pose_all_identity(self, two_joint_rig):
        rest = regress_joints(two_joint_rig.template, two_joint_rig)
        rot, trans = forward_kinematics(np.zeros(3), rest, two_joint_rig)
        np.testing.assert_array_equal(rot[0], np.eye(3))
        np.testing.assert_array_equal(rot[1], np.eye(3))
        np.testing.assert_array_equal(trans, np.zeros((2, 3)))

    def test_planar_quarter_turn(self, two_joint_rig):
        # child joint rests at (1,0,0); rotating pi/2 about z sends (2,0,0)->(1,1,0)
        rest = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        rot, trans = forward_kinematics(np.array([0, 0, np.pi / 2]), rest,
                                        two_joint_rig)
        moved = rot[1] @ np.array([2.0, 0.0, 0.0]) + trans[1]
        np.testing.assert_allclose(moved, [1.0, 1.0, 0.0], atol=1e-15)

    def test_random_chain_matches_recursive_oracle(self):
        rng = np.random.default_rng(5)
        k = 4
        c = build_constants(rng.normal(size=(6, 3)), [-1, 0, 1, 2],
                            np.tile([0.25] * 4, (6, 1)),
                            np.tile([1 / 6] * 6, (4, 1)),
                            pose_basis=np.eye(9))
        rest = rng.normal(scale=2.0, size=(k, 3))
        aa = rng.normal(size=9)
        rot, trans = forward_kinematics(aa, rest, c)

        def oracle_transform(j):
            if j == 0:
                return np.eye(4)
            local = np.eye(4)
            r = _oracle_rot(aa[3 * (j - 1):3 * j])
            local[:3, :3] = r
            local[:3, 3] = rest[j] - r @ rest[j]
            return oracle_transform(j - 1) @ local

        for j in range(k):
            m = oracle_transform(j)
            np.testing.assert_allclose(rot[j], m[:3, :3], atol=1e-12)
            np.testing.assert_allclose(trans[j], m[:3, 3], atol=1e-12)

    def test_cyclic_parent_table_rejected(self):
        with pytest.raises(ModelLoadError):
            build_constants(np.zeros((4, 3)), [-1, 2, 1, 0],
                            np.tile([0.25] * 4, (4, 1)),
                            np.tile([0.25] * 4, (4, 1)))


class TestSkin:
    def test_rest_pose_identity(self, two_joint_rig):
        rest = regress_joints(two_joint_rig.template, two_joint_rig)
        transforms = forward_kinematics(np.zeros(3), rest, two_joint_rig)
        out = skin(two_joint_rig.template, transforms, two_joint_rig)
        np.testing.assert_allclose(out, two_joint_rig.template, atol=1e-15)

    def test_fully_owned_vertex_moves_rigidly(self, two_joint_rig):
        rest = regress_joints(two_joint_rig.template, two_joint_rig)
        aa = np.array([0.3, -0.8, 0.5])
        rot, trans = forward_kinematics(aa, rest, two_joint_rig)
        out = skin(two_joint_rig.template, (rot, trans), two_joint_rig)
        expected = rot[1] @ two_joint_rig.template[2] + trans[1]
        np.testing.assert_allclose(out[2], expected, atol=1e-12)

    def test_matches_brute_force_accumulation(self):
        rng = np.random.default_rng(6)
        v, k = 10, 3
        weights = rng.uniform(0.1, 1.0, size=(v, k))
        weights /= weights.sum(axis=1, keepdims=True)
        c = build_constants(rng.normal(size=(v, 3)), [-1, 0, 1], weights,
                            np.tile([1 / v] * v, (k, 1)), pose_basis=np.eye(6))
        rest = regress_joints(c.template, c)
        aa = rng.normal(size=6)
        rot, trans = forward_kinematics(aa, rest, c)
        out = skin(c.template, (rot, trans), c)
        for i in range(v):
            acc = np.zeros(3)
            for j in range(k):
                acc += weights[i, j] * (rot[j] @ c.template[i] + trans[j])
            np.testing.assert_allclose(out[i], acc, atol=1e-12)


class TestPoseHand:
    def test_zero_params_identity(self, two_joint_rig):
        posed = pose_hand(HandParams(np.zeros(2), np.zeros(3)), two_joint_rig)
        np.testing.assert_array_equal(posed.vertices, two_joint_rig.template)
        rest = regress_joints(two_joint_rig.template, two_joint_rig)
        np.testing.assert_allclose(posed.joints[:2], rest, atol=1e-15)
        np.testing.assert_array_equal(
            posed.joints[2:], two_joint_rig.template[two_joint_rig.fingertip_vertex_ids])

    def test_paper_scale_dimensions(self):
        rig = make_rig(RigSpec(n_joints=16, n_vertices=778, seed=1))
        posed = pose_hand(HandParams.zeros(), rig)
        assert posed.vertices.shape == (778, 3)
        assert posed.joints.shape == (21, 3)
        assert rig.faces.shape[0] > 0

    def test_matches_straight_line_oracle(self):
        rng = np.random.default_rng(7)
        rig = make_rig(RigSpec(n_joints=5, n_vertices=24, n_shape=3, n_pose=4,
                               seed=9), include_palm_center=True)
        for _ in range(5):
            beta = rng.uniform(-0.03, 0.03, 3)
            theta = rng.uniform(-2, 2, 4)
            posed = pose_hand(HandParams(beta, theta), rig)
            overts, ojoints = oracle_pose_hand(beta, theta, rig)
            np.testing.assert_allclose(posed.vertices, overts, atol=1e-9)
            np.testing.assert_allclose(posed.joints, ojoints, atol=1e-9)

    def test_fingertips_identical_to_vertices(self):
        rig = make_rig(RigSpec(seed=13))
        posed = pose_hand(HandParams(np.full(10, 0.01), np.linspace(-1, 1, 10)), rig)
        tips = posed.vertices[rig.fingertip_vertex_ids]
        assert np.array_equal(posed.joints[16:21], tips)

    def test_shape_linearity(self):
        rig = make_rig(RigSpec(seed=21))
        rng = np.random.default_rng(8)
        b1, b2 = rng.uniform(-0.03, 0.03, (2, 10))
        t0 = np.zeros(10)
        base = rig.template
        d12 = pose_hand(HandParams(b1 + b2, t0), rig).vertices - base
        d1 = pose_hand(HandParams(b1, t0), rig).vertices - base
        d2 = pose_hand(HandParams(b2, t0), rig).vertices - base
        np.testing.assert_allclose(d12, d1 + d2, atol=1e-10)

    def test_rigid_subtree_distance_preservation(self):
        # vertices 1, 2, 4 are fully owned by joint 1 in the two-joint rig
        rng = np.random.default_rng(9)
        template = np.array([
            [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0],
            [0.5, 0.5, 0.0], [1.5, -0.5, 0.0],
        ])
        skinw = np.array([[1, 0], [0, 1], [0, 1], [1, 0], [0, 1]], dtype=float)
        reg = np.zeros((2, 5))
        reg[0, 0] = 1.0
        reg[1, 1] = 1.0
        c = build_constants(template, [-1, 0], skinw, reg, pose_basis=np.eye(3))
        owned = [1, 2, 4]
        rest_d = [np.linalg.norm(template[a] - template[b])
                  for a in owned for b in owned]
        for _ in range(10):
            posed = pose_hand(HandParams(np.zeros(2), rng.normal(size=3)), c)
            cur = [np.linalg.norm(posed.vertices[a] - posed.vertices[b])
                   for a in owned for b in owned]
            np.testing.assert_allclose(cur, rest_d, atol=1e-9)


class TestPoseHandJacobian:
    def test_beta_columns_at_rest_equal_regressed_blend(self):
        rig = make_rig(RigSpec(seed=31))
        jac = pose_hand_jacobian(HandParams.zeros(), rig)
        k = rig.n_joints
        expected = np.einsum("kv,nvc->kcn", rig.joint_regressor, rig.shape_blend)
        np.testing.assert_allclose(jac[:3 * k, :10],
                                   expected.reshape(3 * k, 10), atol=1e-10)

    def test_zero_blend_shapes_give_zero_beta_columns(self):
        rng = np.random.default_rng(10)
        c = build_constants(rng.normal(size=(6, 3)), [-1, 0, 1],
                            np.tile([1 / 3] * 3, (6, 1)),
                            np.tile([1 / 6] * 6, (3, 1)),
                            shape_blend=np.zeros((4, 6, 3)),
                            pose_basis=np.eye(6))
        jac = pose_hand_jacobian(HandParams(np.zeros(4), rng.normal(size=6)), c)
        assert np.abs(jac[:, :4]).max() == 0.0

    def test_matches_central_finite_differences(self):
        rig = make_rig(RigSpec(seed=17), include_palm_center=True)
        rng = np.random.default_rng(11)
        h = 1e-5
        for _ in range(10):
            beta = rng.uniform(-0.03, 0.03, 10)
            theta = rng.uniform(-2.0, 2.0, 10)
            jac = pose_hand_jacobian(HandParams(beta, theta), rig)
            x0 = np.concatenate([beta, theta])

            def joints_at(x):
                return pose_hand(HandParams(x[:10], x[10:]), rig).joints.ravel()

            fd = np.empty_like(jac)
            for i in range(20):
                e = np.zeros(20)
                e[i] = h
                fd[:, i] = (joints_at(x0 + e) - joints_at(x0 - e)) / (2 * h)
            rel = np.abs(jac - fd) / np.maximum(np.abs(fd), 1.0)
            assert rel.max() < 1e-5


class TestModelConstantsValidation:
    def test_bad_row_sums_rejected(self):
        with pytest.raises(ModelLoadError):
            build_constants(np.zeros((4, 3)), [-1, 0],
                            np.tile([0.6, 0.6], (4, 1)),
                            np.tile([0.25] * 4, (2, 1)))

    def test_negative_weights_rejected(self):
        with pytest.raises(ModelLoadError):
            build_constants(np.zeros((4, 3)), [-1, 0],
                            np.tile([1.5, -0.5], (4, 1)),
                            np.tile([0.25] * 4, (2, 1)))

    def test_out_of_range_fingertips_rejected(self):
        with pytest.raises(ModelLoadError):
            build_constants(np.zeros((4, 3)), [-1, 0],
                            np.tile([0.5, 0.5], (4, 1)),
                            np.tile([0.25] * 4, (2, 1)),
                            fingertips=[0, 1, 2, 3, 9])
