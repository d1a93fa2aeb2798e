"""Losses, the confidence-weighted 2D objective, and the dogleg solver."""

from .dogleg import DoglegOptions, DoglegResult, IterationRecord, solve_dogleg
from .losses import (Detections2D, Joints3DTarget, LossWeights,
                     SupervisionTargets, TotalLoss, loss_2d, loss_3d,
                     loss_mask, loss_reg, total_loss)
from .problem import (FitIteration, FitOptions, FitProblem, FitReport,
                      fit_detections, fit_objective_residuals, init_view,
                      reprojection_rmse)

__all__ = [
    "Detections2D", "Joints3DTarget", "LossWeights", "SupervisionTargets",
    "TotalLoss", "loss_2d", "loss_3d", "loss_mask", "loss_reg", "total_loss",
    "DoglegOptions", "DoglegResult", "IterationRecord", "solve_dogleg",
    "FitOptions", "FitProblem", "FitReport", "FitIteration",
    "fit_detections", "fit_objective_residuals", "init_view", "reprojection_rmse",
]
