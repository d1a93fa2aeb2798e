"""Confidence-weighted 2D fitting: objective residuals, initialization,
and the two-stage trust-region solve.

The data term sums p_i * (s Pi(R J_i(beta, theta)) + t - x_i)^2 over the 21
detected joints; sqrt(p_i)-weighted residual rows realize it exactly in
least-squares form.  The regularizer appends sqrt(alpha_beta) * beta rows
and (by default unweighted) theta rows, so |residuals|^2 equals the scalar
objective.  Zero-confidence joints keep zero rows, leaving shapes static.
"""

from dataclasses import dataclass, field

import numpy as np

from ..camera import ViewParams, project_jacobian_raw, project_raw
from ..errors import ContractError, InitError
from ..hand_model import (HandParams, ModelConstants, pose_hand,
                          pose_hand_jacobian)
from .dogleg import DoglegOptions, IterationRecord, solve_dogleg
from .losses import Detections2D, LossWeights


@dataclass
class FitOptions:
    max_iter: int = 200
    gtol: float = 1e-8
    steptol: float = 1e-10
    trust_radius_init: float = 1.0
    two_stage: bool = True
    stage1_iters: int = 20
    alpha_beta: float = 1e4
    theta_reg_weight: float = 1.0  # Eq-style objective keeps this at 1

    def dogleg(self, max_iter: int | None = None) -> DoglegOptions:
        return DoglegOptions(max_iter=max_iter or self.max_iter, gtol=self.gtol,
                             steptol=self.steptol,
                             trust_radius_init=self.trust_radius_init)


@dataclass
class FitProblem:
    """One fitting instance: detections plus optional warm-start parameters."""

    detections: Detections2D
    init_view: ViewParams | None = None
    init_params: HandParams | None = None


@dataclass
class FitIteration:
    stage: int
    objective: float
    trust_radius: float
    step_norm: float
    accepted: bool


@dataclass
class FitReport:
    rot: np.ndarray
    trans: np.ndarray
    scale: float
    beta: np.ndarray
    theta: np.ndarray
    objective: float
    data_term: float
    beta_reg: float
    theta_reg: float
    reproj_rmse: float
    iterations: int
    termination: str
    trace: list[FitIteration] = field(default_factory=list)

    @property
    def view(self) -> ViewParams:
        return ViewParams(rot=self.rot, trans=self.trans, scale=self.scale)

    @property
    def params(self) -> HandParams:
        return HandParams(beta=self.beta, theta=self.theta)


def init_view(detections: Detections2D, model_rest_joints: np.ndarray) -> ViewParams:
    """Closed-form view guess: match bounding-box diagonals and centroids.

    Uses only joints with positive confidence; needs at least 3 of them.
    The rotation starts at identity.
    """
    conf = detections.confidence > 0.0
    if int(conf.sum()) < 3:
        raise InitError("need at least 3 joints with positive confidence")
    det = detections.points[conf]
    rest = np.asarray(model_rest_joints, dtype=float)[conf, :2]

    det_diag = float(np.linalg.norm(det.max(axis=0) - det.min(axis=0)))
    rest_diag = float(np.linalg.norm(rest.max(axis=0) - rest.min(axis=0)))
    if rest_diag <= 0.0:
        raise InitError("rest joints are degenerate (zero spread)")
    scale = det_diag / rest_diag if det_diag > 0.0 else 1.0
    trans = det.mean(axis=0) - scale * rest.mean(axis=0)
    return ViewParams(rot=np.zeros(3), trans=trans, scale=scale)


def _split(x: np.ndarray, n_shape: int, n_pose: int):
    return x[0:3], x[3:5], float(x[5]), x[6:6 + n_shape], x[6 + n_shape:]


def _residuals_raw(x: np.ndarray, detections: Detections2D,
                   constants: ModelConstants, alpha_beta: float,
                   theta_reg_weight: float) -> tuple[np.ndarray, np.ndarray]:
    """Residuals and Jacobian at a raw parameter vector (no domain checks)."""
    ns, nq = constants.n_shape, constants.n_pose
    rot, trans, scale, beta, theta = _split(x, ns, nq)
    params = HandParams(beta=beta, theta=theta)
    n = detections.n_joints

    joints = pose_hand(params, constants).joints[:n]
    pj = pose_hand_jacobian(params, constants)[:3 * n]
    proj = project_raw(joints, rot, trans, scale)
    proj_jac = project_jacobian_raw(joints, pj, rot, scale)

    sqrt_p = np.sqrt(detections.confidence)
    wrows = np.repeat(sqrt_p, 2)
    res = np.concatenate([
        wrows * (proj - detections.points).ravel(),
        np.sqrt(alpha_beta) * beta,
        np.sqrt(theta_reg_weight) * theta,
    ])
    jac = np.zeros((2 * n + ns + nq, 6 + ns + nq))
    jac[:2 * n] = wrows[:, None] * proj_jac
    jac[2 * n:2 * n + ns, 6:6 + ns] = np.sqrt(alpha_beta) * np.eye(ns)
    jac[2 * n + ns:, 6 + ns:] = np.sqrt(theta_reg_weight) * np.eye(nq)
    return res, jac


def fit_objective_residuals(view: ViewParams, params: HandParams,
                            detections: Detections2D, constants: ModelConstants,
                            weights: LossWeights | None = None,
                            theta_reg_weight: float = 1.0
                            ) -> tuple[np.ndarray, np.ndarray]:
    """Residual vector and Jacobian of the confidence-weighted 2D objective.

    The squared norm of the residuals equals the scalar objective
    sum_i p_i |proj_i - x_i|^2 + alpha_beta |beta|^2 + w_theta |theta|^2.
    Rows: 2 per joint (sqrt(p)-weighted), then beta, then theta terms.
    Columns: rot (3), trans (2), scale, beta, theta.
    """
    if detections.n_joints + 5 > constants.n_keypoints + 5:
        raise ContractError("detections exceed the model keypoint count")
    alpha_beta = (weights or LossWeights()).alpha_beta
    x = np.concatenate([view.as_vector(), params.beta, params.theta])
    return _residuals_raw(x, detections, constants, alpha_beta, theta_reg_weight)


def reprojection_rmse(view_vec: np.ndarray, params: HandParams,
                      detections: Detections2D, constants: ModelConstants) -> float:
    """Unweighted RMSE of the 2D reprojection over joints with confidence > 0."""
    conf = detections.confidence > 0.0
    if not conf.any():
        return float("nan")
    joints = pose_hand(params, constants).joints[:detections.n_joints]
    proj = project_raw(joints, view_vec[0:3], view_vec[3:5], float(view_vec[5]))
    err2 = ((proj - detections.points)[conf] ** 2).sum(axis=1)
    return float(np.sqrt(err2.mean()))


def fit_detections(constants: ModelConstants, problem: FitProblem,
                   options: FitOptions | None = None) -> FitReport:
    """Fit view and hand parameters to one set of 2D detections.

    Stage 1 (optional) freezes (beta, theta) and aligns the rigid view for a
    short budget; stage 2 optimizes everything jointly.
    """
    opts = options or FitOptions()
    det = problem.detections
    if det.n_joints != constants.n_joints + 5:
        raise ContractError(
            f"expected {constants.n_joints + 5} detections, got {det.n_joints}")
    ns, nq = constants.n_shape, constants.n_pose

    params0 = problem.init_params or HandParams.zeros(ns, nq)
    if problem.init_view is not None:
        view0 = problem.init_view
    else:
        rest = pose_hand(HandParams.zeros(ns, nq), constants).joints[:det.n_joints]
        view0 = init_view(det, rest)
    x = np.concatenate([view0.as_vector(), params0.beta, params0.theta])

    trace: list[FitIteration] = []
    total_iters = 0

    if opts.two_stage:
        frozen = x[6:].copy()

        def stage1(v6):
            res, jac = _residuals_raw(np.concatenate([v6, frozen]), det, constants,
                                      opts.alpha_beta, opts.theta_reg_weight)
            n2 = 2 * det.n_joints  # only the data rows react to the view block
            return res[:n2], jac[:n2, :6]

        r1 = solve_dogleg(stage1, x[:6], opts.dogleg(max_iter=opts.stage1_iters))
        x[:6] = r1.x
        trace.extend(_tag(r1.trace, 1))
        total_iters += r1.iterations

    def full(xv):
        return _residuals_raw(xv, det, constants, opts.alpha_beta,
                              opts.theta_reg_weight)

    r2 = solve_dogleg(full, x, opts.dogleg())
    trace.extend(_tag(r2.trace, 2))
    total_iters += r2.iterations
    x = r2.x

    rot, trans, scale, beta, theta = _split(x, ns, nq)
    res, _ = full(x)
    n2 = 2 * det.n_joints
    data_term = float(res[:n2] @ res[:n2])
    beta_reg = float(res[n2:n2 + ns] @ res[n2:n2 + ns])
    theta_reg = float(res[n2 + ns:] @ res[n2 + ns:])
    return FitReport(
        rot=rot.copy(), trans=trans.copy(), scale=scale,
        beta=beta.copy(), theta=theta.copy(),
        objective=r2.objective, data_term=data_term,
        beta_reg=beta_reg, theta_reg=theta_reg,
        reproj_rmse=reprojection_rmse(x[:6], HandParams(beta, theta), det, constants),
        iterations=total_iters, termination=r2.termination, trace=trace)


def _tag(records: list[IterationRecord], stage: int) -> list[FitIteration]:
    return [FitIteration(stage=stage, objective=r.objective,
                         trust_radius=r.trust_radius, step_norm=r.step_norm,
                         accepted=r.accepted) for r in records]
