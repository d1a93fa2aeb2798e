"""Pose-estimation metrics and the evaluation preprocessing protocol:
PCK curves, mean joint distances, root alignment, detector-box cropping
and left-hand flipping.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, FeatureUnavailable
from .hand_model import ModelConstants, PosedHand

CROP_EXPANSION = 2.2
CROP_OUTPUT_SIZE = 320

# Threshold grids matching the plotted evaluation ranges.
DEFAULT_3D_THRESHOLDS_MM = np.linspace(20.0, 50.0, 31)
DEFAULT_2D_THRESHOLDS_PX = np.linspace(0.0, 30.0, 31)


@dataclass
class PckCurve:
    """Fraction of joints under each error threshold, plus normalized AUC."""

    thresholds: np.ndarray
    values: np.ndarray
    auc: float


@dataclass
class CropSpec:
    """Square crop of side 2.2*l around the detector box center, resized to 320."""

    center: np.ndarray
    side: float
    output_size: int = CROP_OUTPUT_SIZE

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).reshape(2)
        if self.side <= 0:
            raise ContractError("crop side must be positive")


def pck(pred: np.ndarray, gt: np.ndarray, thresholds: np.ndarray,
        present: np.ndarray | None = None) -> PckCurve:
    """PCK curve over ascending thresholds (same units as the inputs)."""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ContractError(f"pred/gt shapes differ: {pred.shape} vs {gt.shape}")
    thresholds = np.asarray(thresholds, dtype=float)
    if thresholds.size == 0 or (np.diff(thresholds) < 0).any():
        raise ContractError("thresholds must be ascending and nonempty")
    err = np.linalg.norm(pred - gt, axis=-1).ravel()
    if present is not None:
        err = err[np.asarray(present, dtype=bool).ravel()]
    if err.size == 0:
        raise ContractError("no joints to evaluate")
    values = np.array([(err <= t).mean() for t in thresholds])
    # Normalized area under the curve over the finite threshold range.
    finite = np.isfinite(thresholds)
    span = thresholds[finite][-1] - thresholds[finite][0] if finite.sum() > 1 else 0.0
    if span > 0:
        auc = float(np.trapezoid(values[finite], thresholds[finite]) / span)
    else:
        auc = float(values[-1])
    return PckCurve(thresholds=thresholds, values=values, auc=auc)


def mean_joint_distance(pred: np.ndarray, gt: np.ndarray,
                        present: np.ndarray | None = None) -> float:
    """Mean Euclidean error over (present) joints."""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ContractError(f"pred/gt shapes differ: {pred.shape} vs {gt.shape}")
    err = np.linalg.norm(pred - gt, axis=-1).ravel()
    if present is not None:
        err = err[np.asarray(present, dtype=bool).ravel()]
    if err.size == 0:
        raise ContractError("no joints to evaluate")
    return float(err.mean())


def root_align(pred: np.ndarray, gt: np.ndarray, root_index: int = 0) -> np.ndarray:
    """Translate pred so its root joint coincides with the ground-truth root."""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    return pred + (gt[root_index] - pred[root_index])


def crop_transform(box_center: np.ndarray, box_edge: float,
                   output_size: int = CROP_OUTPUT_SIZE) -> tuple[CropSpec, np.ndarray]:
    """Affine mapping full-image keypoints into crop coordinates.

    The crop is the square of side 2.2*l centred on the detector box; a point
    u maps to (u - center + 1.1*l) * (output_size / (2.2*l)).  Returns the
    CropSpec and a 2x3 matrix [[s, 0, tx], [0, s, ty]].
    """
    if box_edge <= 0:
        raise ContractError("detector box edge must be positive")
    center = np.asarray(box_center, dtype=float).reshape(2)
    side = CROP_EXPANSION * box_edge
    spec = CropSpec(center=center, side=side, output_size=output_size)
    s = output_size / side
    offset = (side / 2.0 - center) * s
    affine = np.array([[s, 0.0, offset[0]], [0.0, s, offset[1]]])
    return spec, affine


def apply_crop(points: np.ndarray, affine: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    return pts @ affine[:, :2].T + affine[:, 2]


def invert_crop(points: np.ndarray, affine: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    return (pts - affine[:, 2]) / np.array([affine[0, 0], affine[1, 1]])


def flip_left_hand(keypoints2d: np.ndarray, image_width: int) -> np.ndarray:
    """Mirror u -> width - 1 - u so left hands match the right-hand model."""
    pts = np.asarray(keypoints2d, dtype=float).copy()
    pts[:, 0] = image_width - 1 - pts[:, 0]
    return pts


def palm_center(posed: PosedHand, constants: ModelConstants) -> np.ndarray:
    """Interpolated palm-center keypoint from the model's vertex weights."""
    if constants.palm_center_weights is None:
        raise FeatureUnavailable("this model defines no palm-center weights")
    return constants.palm_center_weights @ posed.vertices
