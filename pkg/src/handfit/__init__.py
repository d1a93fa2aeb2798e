"""handfit: articulated hand-mesh model, weak-perspective 2D keypoint fitting,
occlusion-aware mask generation, synthetic data and PCK evaluation."""

from .camera import Projected2D, ViewParams, project, project_jacobian, rodrigues
from .errors import (ContractError, FeatureUnavailable, HandFitError, InitError,
                     ModelLoadError)
from .hand_model import (HandParams, ModelConstants, PosedHand, decode_pose,
                         deform_template, forward_kinematics, pose_hand,
                         pose_hand_jacobian, regress_joints, skin)
from .model_io import (load_model, load_model_binary, load_model_json, read_obj,
                       save_model, save_model_json, write_obj)
from .synth import RigSpec, SyntheticSample, generate_dataset, make_rig, sample_params

__version__ = "0.1.0"

__all__ = [
    "ViewParams", "Projected2D", "project", "project_jacobian", "rodrigues",
    "ModelConstants", "HandParams", "PosedHand",
    "decode_pose", "deform_template", "forward_kinematics", "regress_joints",
    "skin", "pose_hand", "pose_hand_jacobian",
    "save_model", "save_model_json", "load_model", "load_model_binary",
    "load_model_json", "write_obj", "read_obj",
    "RigSpec", "SyntheticSample", "make_rig", "sample_params", "generate_dataset",
    "HandFitError", "ContractError", "ModelLoadError", "InitError",
    "FeatureUnavailable",
    "__version__",
]
