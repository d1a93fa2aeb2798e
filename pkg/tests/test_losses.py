import numpy as np
import pytest

from handfit.camera import Projected2D, ViewParams, project
from handfit.errors import ContractError
from handfit.fitting import (Detections2D, Joints3DTarget, LossWeights,
                             SupervisionTargets, loss_2d, loss_3d, loss_mask,
                             loss_reg, total_loss)
from handfit.hand_model import HandParams, pose_hand
from handfit.rotation import rodrigues
from handfit.segmentation.masks import HandMask
from handfit.synth import RigSpec, make_rig


def det(points, conf=None):
    points = np.asarray(points, dtype=float)
    if conf is None:
        conf = np.ones(points.shape[0])
    return Detections2D(points=points, confidence=conf)


class TestLoss2D:
    def test_identical_inputs_zero(self):
        pts = np.arange(42, dtype=float).reshape(21, 2)
        assert loss_2d(Projected2D(pts), det(pts)) == 0.0

    def test_single_joint_l1(self):
        pts = np.zeros((21, 2))
        target = pts.copy()
        target[4] = [3.0, -4.0]
        assert loss_2d(Projected2D(pts), det(target)) == 7.0

    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(0)
        a, b = rng.normal(size=(2, 21, 2))
        expected = 0.0
        for i in range(21):
            expected += abs(a[i, 0] - b[i, 0]) + abs(a[i, 1] - b[i, 1])
        assert abs(loss_2d(Projected2D(a), det(b)) - expected) < 1e-12

    def test_count_mismatch_raises(self):
        with pytest.raises(ContractError):
            loss_2d(Projected2D(np.zeros((21, 2))), det(np.zeros((20, 2))))

    def test_nonfinite_target_rows_skipped(self):
        pts = np.ones((21, 2))
        target = pts.copy()
        target[3] = np.nan
        target[5] = [2.0, 1.0]
        assert loss_2d(Projected2D(pts), det(target)) == 1.0


class TestLoss3D:
    def _posed(self, seed=0):
        rig = make_rig(RigSpec(seed=seed))
        posed = pose_hand(HandParams.zeros(), rig)
        return posed

    def test_exact_target_zero(self):
        posed = self._posed()
        rot = np.array([0.2, -0.1, 0.4])
        target = Joints3DTarget(points=posed.joints @ rodrigues(rot).T)
        assert loss_3d(posed, rot, target) == 0.0

    def test_single_offset_squared(self):
        posed = self._posed()
        rot = np.zeros(3)
        pts = posed.joints.copy()
        pts[2] += [1.0, 2.0, 2.0]
        assert abs(loss_3d(posed, rot, Joints3DTarget(points=pts)) - 9.0) < 1e-9

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(1)
        posed = self._posed(3)
        rot = rng.normal(size=3)
        pts = rng.normal(scale=40.0, size=posed.joints.shape)
        present = rng.uniform(size=pts.shape[0]) > 0.3
        out = loss_3d(posed, rot, Joints3DTarget(points=pts, present=present))
        r = rodrigues(rot)
        expected = 0.0
        for i in range(pts.shape[0]):
            if present[i]:
                expected += ((r @ posed.joints[i] - pts[i]) ** 2).sum()
        assert abs(out - expected) < 1e-9


class TestLossReg:
    def test_zero_params(self):
        assert loss_reg(HandParams(np.zeros(10), np.zeros(10)), LossWeights()) == 0.0

    def test_paper_weight_value(self):
        e1b = np.zeros(10)
        e1b[0] = 1.0
        out = loss_reg(HandParams(e1b, e1b.copy()), LossWeights())
        assert out == 10001.0

    def test_matches_loop(self):
        rng = np.random.default_rng(2)
        beta, theta = rng.normal(size=(2, 10))
        w = LossWeights(alpha_beta=37.5)
        expected = sum(t * t for t in theta) + 37.5 * sum(b * b for b in beta)
        assert abs(loss_reg(HandParams(beta, theta), w) - expected) < 1e-10


class TestLossMask:
    def test_all_inside(self):
        mask = HandMask(np.ones((8, 8), dtype=np.uint8))
        proj = Projected2D(np.full((10, 2), 4.0))
        assert loss_mask(proj, mask) == 0.0

    def test_all_outside(self):
        mask = HandMask(np.ones((8, 8), dtype=np.uint8))
        proj = Projected2D(np.full((10, 2), 50.0))
        assert loss_mask(proj, mask) == 1.0

    def test_fraction(self):
        pix = np.zeros((8, 8), dtype=np.uint8)
        pix[2, 2] = 1
        mask = HandMask(pix)
        pts = np.array([[2.0, 2.0], [2.0, 2.0], [2.0, 2.0], [6.0, 6.0]])
        assert loss_mask(Projected2D(pts), mask) == 0.25

    def test_empty_mask_is_one_with_warning(self, caplog):
        mask = HandMask(np.zeros((4, 4), dtype=np.uint8))
        with caplog.at_level("WARNING"):
            out = loss_mask(Projected2D(np.ones((3, 2))), mask)
        assert out == 1.0
        assert any("empty mask" in r.message for r in caplog.records)


class TestTotalLoss:
    def test_paper_weighted_sum(self):
        # unit 2D/3D/reg terms, zero mask term -> 1 + 100 + 0 + 10 = 111
        w = LossWeights()
        assert w.alpha_3d == 100.0 and w.alpha_mask == 100.0 and w.alpha_reg == 10.0
        total = 1.0 + w.alpha_3d * 1.0 + w.alpha_mask * 0.0 + w.alpha_reg * 1.0
        assert total == 111.0

    def test_zero_everything(self):
        rig = make_rig(RigSpec(seed=4))
        params = HandParams.zeros()
        view = ViewParams(scale=1.0)
        posed = pose_hand(params, rig)
        targets = SupervisionTargets(
            detections=det(project(posed.joints, view).points))
        out = total_loss(params, view, targets, LossWeights(), rig)
        assert out.total == 0.0 and out.l2d == 0.0 and out.lreg == 0.0

    def test_breakdown_weighted_sum_random(self):
        rng = np.random.default_rng(5)
        rig = make_rig(RigSpec(seed=6))
        params = HandParams(rng.uniform(-0.03, 0.03, 10), rng.uniform(-2, 2, 10))
        view = ViewParams(rot=rng.normal(size=3), trans=[160, 160], scale=1.2)
        posed = pose_hand(params, rig)
        mask = HandMask((rng.uniform(size=(320, 320)) > 0.5).astype(np.uint8))
        targets = SupervisionTargets(
            detections=det(rng.normal(160, 40, size=(21, 2))),
            joints3d=Joints3DTarget(points=rng.normal(scale=30, size=posed.joints.shape)),
            mask=mask)
        w = LossWeights()
        out = total_loss(params, view, targets, w, rig)
        expected = (out.l2d + w.alpha_3d * out.l3d + w.alpha_mask * out.lmask
                    + w.alpha_reg * out.lreg)
        assert abs(out.total - expected) < 1e-9
        assert out.l2d > 0 and out.l3d > 0 and out.lreg > 0

    def test_no_targets_raises(self):
        rig = make_rig(RigSpec(seed=7))
        with pytest.raises(ContractError):
            total_loss(HandParams.zeros(), ViewParams(), SupervisionTargets(),
                       LossWeights(), rig)

    def test_absent_targets_contribute_zero(self):
        rig = make_rig(RigSpec(seed=8))
        params = HandParams.zeros()
        view = ViewParams(trans=[100.0, 100.0], scale=1.0)
        posed = pose_hand(params, rig)
        targets = SupervisionTargets(
            joints3d=Joints3DTarget(points=posed.joints.copy()))
        out = total_loss(params, view, targets, LossWeights(), rig)
        assert out.l2d == 0.0 and out.lmask == 0.0
        assert out.total == 0.0


def test_confidence_clamped_at_ingestion():
    d = Detections2D(points=np.zeros((3, 2)), confidence=[-0.5, 0.5, 7.0])
    np.testing.assert_array_equal(d.confidence, [0.0, 0.5, 1.0])
