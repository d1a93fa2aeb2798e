"""Supervision losses: 2D reprojection (L1), 3D joints (squared L2),
mask coverage, and parameter regularization, plus their weighted total.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ..camera import Projected2D, ViewParams, project
from ..errors import ContractError
from ..hand_model import HandParams, ModelConstants, PosedHand, pose_hand
from ..rotation import rodrigues
from ..segmentation.masks import HandMask

log = logging.getLogger(__name__)


@dataclass
class Detections2D:
    """2D keypoint detections with per-joint confidences (clamped to [0, 1])."""

    points: np.ndarray
    confidence: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ContractError(f"detections must be n x 2, got {self.points.shape}")
        conf = np.asarray(self.confidence, dtype=float).reshape(-1)
        if conf.shape[0] != self.points.shape[0]:
            raise ContractError("one confidence per detected joint required")
        if not np.isfinite(conf).all():
            raise ContractError("confidences must be finite")
        self.confidence = np.clip(conf, 0.0, 1.0)

    @property
    def n_joints(self) -> int:
        return self.points.shape[0]


@dataclass
class Joints3DTarget:
    """Ground-truth 3D joints (camera frame, mm) with per-joint availability."""

    points: np.ndarray
    present: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ContractError(f"3D target must be n x 3, got {self.points.shape}")
        if self.present is None:
            self.present = np.ones(self.points.shape[0], dtype=bool)
        else:
            self.present = np.asarray(self.present, dtype=bool).reshape(-1)
            if self.present.shape[0] != self.points.shape[0]:
                raise ContractError("present flags must match the joint count")
        if not np.isfinite(self.points[self.present]).all():
            raise ContractError("present target joints must be finite")


@dataclass
class LossWeights:
    """Weighting factors of the combined training objective."""

    alpha_3d: float = 100.0
    alpha_mask: float = 100.0
    alpha_reg: float = 10.0
    alpha_beta: float = 1e4

    def __post_init__(self):
        for name in ("alpha_3d", "alpha_mask", "alpha_reg", "alpha_beta"):
            if getattr(self, name) < 0:
                raise ContractError(f"{name} must be nonnegative")


@dataclass
class SupervisionTargets:
    """Optional per-sample supervision; at least one target must be present."""

    detections: "Detections2D | None" = None
    joints3d: "Joints3DTarget | None" = None
    mask: "HandMask | None" = None

    @property
    def has_any(self) -> bool:
        return (self.detections is not None or self.joints3d is not None
                or self.mask is not None)


@dataclass
class TotalLoss:
    total: float
    l2d: float = 0.0
    l3d: float = 0.0
    lmask: float = 0.0
    lreg: float = 0.0

    def breakdown(self) -> dict[str, float]:
        return {"2d": self.l2d, "3d": self.l3d, "mask": self.lmask, "reg": self.lreg}


def loss_2d(projected: Projected2D, target: Detections2D) -> float:
    """L1 distance between projected and detected joints; non-finite target
    rows are treated as unavailable and contribute nothing."""
    if projected.points.shape[0] != target.points.shape[0]:
        raise ContractError("projected/detected joint counts differ")
    diff = projected.points - target.points
    avail = np.isfinite(target.points).all(axis=1)
    return float(np.abs(diff[avail]).sum())


def loss_3d(posed: PosedHand, view_rot: np.ndarray, target: Joints3DTarget) -> float:
    """Squared L2 distance between view-rotated model joints and the target."""
    n = target.points.shape[0]
    if n > posed.joints.shape[0]:
        raise ContractError("target has more joints than the model produces")
    rotated = posed.joints[:n] @ rodrigues(np.asarray(view_rot, dtype=float)).T
    diff = (rotated - target.points)[target.present]
    return float((diff ** 2).sum())


def loss_reg(params: HandParams, weights: LossWeights) -> float:
    """|theta|^2 + alpha_beta * |beta|^2, penalizing implausible coefficients."""
    return float(params.theta @ params.theta
                 + weights.alpha_beta * (params.beta @ params.beta))


def loss_mask(projected_vertices: Projected2D, mask: HandMask) -> float:
    """Fraction of projected vertices whose rounded pixel misses the hand mask.

    Vertices landing outside the image count as misses.  An all-zero mask is
    degenerate: the loss is 1 and a diagnostic is logged.
    """
    if mask.is_empty():
        log.warning("mask loss evaluated against an empty mask")
        return 1.0
    pts = np.rint(projected_vertices.points).astype(np.int64)
    inside = ((pts[:, 0] >= 0) & (pts[:, 0] < mask.width)
              & (pts[:, 1] >= 0) & (pts[:, 1] < mask.height))
    hits = np.zeros(pts.shape[0], dtype=bool)
    hits[inside] = mask.pixels[pts[inside, 1], pts[inside, 0]] == 1
    return float(1.0 - hits.mean())


def total_loss(params: HandParams, view: ViewParams, targets: SupervisionTargets,
               weights: LossWeights, constants: ModelConstants) -> TotalLoss:
    """Weighted sum L2D + a3d*L3D + amask*Lmask + areg*Lreg; absent targets
    contribute zero.  Raises if no supervision target is present at all."""
    if not targets.has_any:
        raise ContractError("at least one supervision target is required")
    posed = pose_hand(params, constants)
    out = TotalLoss(total=0.0, lreg=loss_reg(params, weights))
    if targets.detections is not None:
        n = targets.detections.n_joints
        proj = project(posed.joints[:n], view)
        out.l2d = loss_2d(proj, targets.detections)
    if targets.joints3d is not None:
        out.l3d = loss_3d(posed, view.rot, targets.joints3d)
    if targets.mask is not None:
        out.lmask = loss_mask(project(posed.vertices, view), targets.mask)
    out.total = (out.l2d + weights.alpha_3d * out.l3d
                 + weights.alpha_mask * out.lmask + weights.alpha_reg * out.lreg)
    return out
