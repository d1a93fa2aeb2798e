"""Weak-perspective camera: global rotation, uniform scale, 2D translation.

A point ``p`` (model units / mm) projects to ``s * (R @ p)[:2] + t`` in pixel
coordinates (x right, y down, origin top-left).  The orthographic step drops
the z component after rotation; no intrinsics are involved.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .rotation import rodrigues, rodrigues_jacobian

__all__ = [
    "ViewParams",
    "Projected2D",
    "rodrigues",
    "project",
    "project_raw",
    "project_jacobian",
    "project_jacobian_raw",
]


@dataclass
class ViewParams:
    """Global rotation (axis-angle), 2D translation (px), scale (px per model unit)."""

    rot: np.ndarray = field(default_factory=lambda: np.zeros(3))
    trans: np.ndarray = field(default_factory=lambda: np.zeros(2))
    scale: float = 1.0

    def __post_init__(self):
        self.rot = np.asarray(self.rot, dtype=float).reshape(3)
        self.trans = np.asarray(self.trans, dtype=float).reshape(2)
        self.scale = float(self.scale)
        if not (np.isfinite(self.rot).all() and np.isfinite(self.trans).all()
                and np.isfinite(self.scale)):
            raise ContractError("view parameters must be finite")
        if self.scale <= 0.0:
            raise ContractError(f"scale must be positive, got {self.scale}")

    def as_vector(self) -> np.ndarray:
        """Flat (rot, trans, scale) 6-vector, the solver's view block."""
        return np.concatenate([self.rot, self.trans, [self.scale]])

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "ViewParams":
        v = np.asarray(v, dtype=float)
        return cls(rot=v[0:3], trans=v[3:5], scale=v[5])


@dataclass
class Projected2D:
    """n x 2 array of pixel coordinates."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ContractError(f"expected n x 2 points, got {self.points.shape}")


def project_raw(points3d: np.ndarray, rot: np.ndarray, trans: np.ndarray,
                scale: float) -> np.ndarray:
    """Unvalidated projection on raw values; solvers may pass any scale sign."""
    r = rodrigues(rot)
    rotated = np.asarray(points3d, dtype=float) @ r.T
    return scale * rotated[:, :2] + np.asarray(trans, dtype=float)


def project(points3d: np.ndarray, view: ViewParams) -> Projected2D:
    """Weak-perspective projection of an n x 3 point batch.

    Each point p maps to ``view.scale * (rodrigues(view.rot) @ p)[:2] + view.trans``.
    """
    pts = np.asarray(points3d, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ContractError(f"expected n x 3 points, got {pts.shape}")
    if view.scale <= 0.0:
        raise ContractError("scale must be positive")
    return Projected2D(project_raw(pts, view.rot, view.trans, view.scale))


def project_jacobian_raw(points3d: np.ndarray, point_jacobians: np.ndarray,
                         rot: np.ndarray, scale: float) -> np.ndarray:
    """Projection Jacobian on raw view values (no ViewParams validation)."""
    pts = np.asarray(points3d, dtype=float)
    n = pts.shape[0]
    pj = np.asarray(point_jacobians, dtype=float).reshape(3 * n, -1)
    n_hand = pj.shape[1]

    r = rodrigues(rot)
    dr = rodrigues_jacobian(rot)  # (3, 3, 3)
    rotated = pts @ r.T  # n x 3
    s = float(scale)

    jac = np.zeros((2 * n, 6 + n_hand))
    xs = slice(0, 2 * n, 2)
    ys = slice(1, 2 * n, 2)

    # d/d rot_i: s * ((dR/dw_i) @ p)_{xy}
    for i in range(3):
        drp = pts @ dr[i].T  # n x 3
        jac[xs, i] = s * drp[:, 0]
        jac[ys, i] = s * drp[:, 1]
    # d/d t: stacked 2x2 identities
    jac[xs, 3] = 1.0
    jac[ys, 4] = 1.0
    # d/d s: orthographic projection of the rotated point
    jac[xs, 5] = rotated[:, 0]
    jac[ys, 5] = rotated[:, 1]
    # d/d hand params: s * (R @ dp)_{xy}, chained through the point jacobians
    if n_hand:
        dp = pj.reshape(n, 3, n_hand)
        rdp = np.einsum("ab,nbp->nap", r, dp)
        jac[xs, 6:] = s * rdp[:, 0, :]
        jac[ys, 6:] = s * rdp[:, 1, :]
    return jac


def project_jacobian(points3d: np.ndarray, point_jacobians: np.ndarray,
                     view: ViewParams) -> np.ndarray:
    """Jacobian of the projected pixel coordinates w.r.t. all parameters.

    Args:
        points3d: n x 3 points in model frame.
        point_jacobians: (3n) x P derivatives of the flattened points w.r.t.
            the P hand parameters (beta then theta), e.g. from
            ``pose_hand_jacobian``.  Pass a (3n) x 0 array for rigid points.

    Returns:
        (2n) x (6 + P) matrix.  Rows are point-major (x0, y0, x1, y1, ...);
        columns are (rot[3], trans[2], scale, hand params[P]).
    """
    return project_jacobian_raw(points3d, point_jacobians, view.rot, view.scale)
