"""Command-line interface.

Subcommands: synth (generate rigs/datasets), fit (batch 2D fitting),
mask (trimap + GrabCut hand masks), eval (PCK/distance metrics),
export-mesh (OBJ export), model (inspect/convert model files).

Exit codes: 0 success, 1 runtime error, 2 usage or contract error.
Set HANDFIT_LOG=debug|info|warning for verbosity.
"""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import evaluation, synth, topology
from .errors import ContractError, HandFitError, ModelLoadError
from .fitting import Detections2D, FitOptions, FitProblem, fit_detections
from .hand_model import HandParams, pose_hand
from .model_io import load_model, save_model, save_model_json, write_obj
from .rotation import rodrigues
from .segmentation import (GrabCutOptions, build_trimap, grabcut,
                           save_mask_png)

log = logging.getLogger("handfit")


def _setup_logging():
    level = os.environ.get("HANDFIT_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _read_jsonl(path: str):
    """Yields (line_number, record_or_None); None marks malformed lines."""
    with open(path) as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield n, json.loads(line)
            except json.JSONDecodeError as exc:
                print(f"{path}:{n}: skipping malformed JSON ({exc})", file=sys.stderr)
                yield n, None


# ---------------------------------------------------------------- synth ----

def cmd_synth(args) -> int:
    if args.model:
        constants = load_model(args.model)
    else:
        rig_seed = args.rig_seed if args.rig_seed is not None else args.seed
        constants = synth.make_rig(
            synth.RigSpec(n_joints=args.joints, n_vertices=args.vertices,
                          n_shape=args.shape_dims, n_pose=args.pose_dims,
                          seed=rig_seed),
            include_palm_center=args.palm_center)
    if args.save_model:
        save_model(constants, args.save_model)

    indices = range(args.n)
    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        samples = list(pool.map(
            lambda i: synth.make_sample(constants, i, args.seed, sigma=args.sigma,
                                        image_size=args.image_size,
                                        with_mask=args.with_masks),
            indices))
    with open(args.out, "w") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_record()))
            fh.write("\n")
    log.info("wrote %d samples to %s", len(samples), args.out)
    return 0


# ------------------------------------------------------------------ fit ----

def _detections_from_record(rec: dict) -> Detections2D:
    kp = np.asarray(rec["keypoints2d"], dtype=float)
    if kp.ndim != 2 or kp.shape[1] not in (2, 3):
        raise ContractError("keypoints2d must be [[u, v, p?], ...]")
    conf = kp[:, 2] if kp.shape[1] == 3 else np.ones(kp.shape[0])
    return Detections2D(points=kp[:, :2], confidence=conf)


def _fit_one(constants, rec: dict, options: FitOptions) -> dict:
    det = _detections_from_record(rec)
    report = fit_detections(constants, FitProblem(detections=det), options)
    joints = pose_hand(report.params, constants).joints[:det.n_joints]
    joints_cam = joints @ rodrigues(report.rot).T
    proj = (report.scale * joints_cam[:, :2] + report.trans)
    return {
        "id": rec.get("id"),
        "rot": report.rot.tolist(),
        "trans": report.trans.tolist(),
        "scale": report.scale,
        "beta": report.beta.tolist(),
        "theta": report.theta.tolist(),
        "objective": report.objective,
        "data_term": report.data_term,
        "reproj_rmse": report.reproj_rmse,
        "iterations": report.iterations,
        "termination": report.termination,
        "joints3d": joints_cam.tolist(),
        "keypoints2d": [[float(u), float(v), 1.0] for u, v in proj],
    }


def cmd_fit(args) -> int:
    constants = load_model(args.model)
    options = FitOptions(max_iter=args.max_iter, gtol=args.gtol,
                         steptol=args.steptol,
                         trust_radius_init=args.trust_radius_init,
                         two_stage=not args.single_stage)
    records = [rec for _, rec in _read_jsonl(args.detections)]
    if not records:
        print("no samples", file=sys.stderr)
        return 2
    valid = [(i, rec) for i, rec in enumerate(records) if rec is not None]
    if not valid:
        print("all input lines were malformed", file=sys.stderr)
        return 1

    def work(item):
        i, rec = item
        try:
            return i, _fit_one(constants, rec, options)
        except (HandFitError, KeyError, TypeError) as exc:
            print(f"sample {rec.get('id', i)}: fit failed ({exc})", file=sys.stderr)
            return i, None

    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        results = list(pool.map(work, valid))

    if args.obj_dir:
        Path(args.obj_dir).mkdir(parents=True, exist_ok=True)
    ok = 0
    with open(args.out, "w") as fh:
        for _, out in results:
            if out is None:
                continue
            ok += 1
            fh.write(json.dumps(out))
            fh.write("\n")
            if args.obj_dir and out["id"] is not None:
                posed = pose_hand(HandParams(out["beta"], out["theta"]), constants)
                write_obj(posed.vertices, constants.faces,
                          Path(args.obj_dir) / f"fit_{out['id']}.obj")
    log.info("fit %d/%d samples", ok, len(records))
    return 0 if ok else 1


# ----------------------------------------------------------------- mask ----

def cmd_mask(args) -> int:
    from PIL import Image

    with open(args.joints) as fh:
        doc = json.load(fh)
    joints = np.asarray(doc["joints"], dtype=float)
    edges = doc.get("edges")
    tris = doc.get("triangles")
    if edges is None:
        if joints.shape[0] != topology.N_KEYPOINTS:
            raise ContractError(
                f"default skeleton needs {topology.N_KEYPOINTS} joints; "
                f"got {joints.shape[0]} (provide explicit 'edges')")
        edges = topology.hand_skeleton_edges()
    if tris is None:
        tris = topology.palm_triangles() if joints.shape[0] == topology.N_KEYPOINTS else []

    image = np.asarray(Image.open(args.image).convert("RGB"))
    h, w = image.shape[:2]
    trimap = build_trimap(joints, edges, tris, (w, h), band_px=args.band)
    result = grabcut(image, trimap,
                     GrabCutOptions(n_components=args.components,
                                    max_iters=args.iters, gamma=args.gamma))
    save_mask_png(result.mask, args.out)
    log.info("mask written to %s (%d GrabCut iterations)", args.out,
             result.iterations)
    return 0


# ----------------------------------------------------------------- eval ----

def cmd_eval(args) -> int:
    preds = {rec["id"]: rec for _, rec in _read_jsonl(args.pred) if rec}
    gts = [rec for _, rec in _read_jsonl(args.gt) if rec]
    if not gts or not preds:
        print("no samples", file=sys.stderr)
        return 2

    pred_pts, gt_pts = [], []
    for rec in gts:
        pid = rec["id"]
        if pid not in preds:
            continue
        if args.space == "3d":
            p = np.asarray(preds[pid]["joints3d"], dtype=float)
            g = np.asarray(rec["joints3d"], dtype=float)
            p = evaluation.root_align(p, g, root_index=args.root_index)
        else:
            p = np.asarray(preds[pid]["keypoints2d"], dtype=float)[:, :2]
            g = np.asarray(rec["keypoints2d"], dtype=float)[:, :2]
        pred_pts.append(p)
        gt_pts.append(g)
    if not pred_pts:
        print("no overlapping sample ids", file=sys.stderr)
        return 2

    pred_all = np.concatenate(pred_pts)
    gt_all = np.concatenate(gt_pts)
    present = np.isfinite(gt_all).all(axis=1)
    if args.thresholds:
        thresholds = np.asarray(sorted(float(t) for t in args.thresholds))
    elif args.space == "3d":
        thresholds = evaluation.DEFAULT_3D_THRESHOLDS_MM
    else:
        thresholds = evaluation.DEFAULT_2D_THRESHOLDS_PX
    curve = evaluation.pck(pred_all, gt_all, thresholds, present=present)
    mean_dist = evaluation.mean_joint_distance(pred_all, gt_all, present=present)

    csv_path = Path(args.out + ".csv")
    with open(csv_path, "w") as fh:
        fh.write("threshold,pck\n")
        for t, v in zip(curve.thresholds, curve.values):
            fh.write(f"{t!r},{v!r}\n")
    summary = {"space": args.space, "mean_distance": mean_dist, "auc": curve.auc,
               "n_samples": len(pred_pts), "n_joints": int(present.sum())}
    with open(args.out + ".json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(json.dumps(summary))
    return 0


# ---------------------------------------------------------- export-mesh ----

def cmd_export_mesh(args) -> int:
    constants = load_model(args.model)
    with open(args.params) as fh:
        doc = json.load(fh)
    params = HandParams(beta=np.asarray(doc.get("beta", []), dtype=float),
                        theta=np.asarray(doc.get("theta", []), dtype=float))
    if params.beta.shape[0] != constants.n_shape or \
            params.theta.shape[0] != constants.n_pose:
        raise ContractError(
            f"params dims ({params.beta.shape[0]}, {params.theta.shape[0]}) do not "
            f"match the model ({constants.n_shape}, {constants.n_pose})")
    posed = pose_hand(params, constants)
    write_obj(posed.vertices, constants.faces, args.out)
    return 0


# ---------------------------------------------------------------- model ----

def cmd_model(args) -> int:
    if args.action == "info":
        constants = load_model(args.path)
        info = {
            "n_vertices": constants.n_vertices,
            "n_faces": constants.n_faces,
            "n_joints": constants.n_joints,
            "n_shape": constants.n_shape,
            "n_pose": constants.n_pose,
            "palm_center": constants.palm_center_weights is not None,
        }
        print(json.dumps(info, indent=2))
        return 0
    constants = load_model(args.path)
    if args.dest.endswith(".json"):
        save_model_json(constants, args.dest)
    else:
        save_model(constants, args.dest)
    return 0


# ----------------------------------------------------------------- main ----

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="handfit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic rig and dataset")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", help="use an existing model file instead of a rig")
    p.add_argument("--rig-seed", type=int, default=None,
                   help="rig generation seed (defaults to --seed)")
    p.add_argument("--joints", type=int, default=16)
    p.add_argument("--vertices", type=int, default=120)
    p.add_argument("--shape-dims", type=int, default=10)
    p.add_argument("--pose-dims", type=int, default=10)
    p.add_argument("--palm-center", action="store_true")
    p.add_argument("--save-model", help="also write the generated model file")
    p.add_argument("--sigma", type=float, default=0.0, help="keypoint noise std (px)")
    p.add_argument("--image-size", type=int, default=synth.DEFAULT_IMAGE_SIZE)
    p.add_argument("--with-masks", action="store_true",
                   help="embed RLE silhouette masks in the records")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit the model to 2D detections (JSONL)")
    p.add_argument("--model", required=True)
    p.add_argument("--detections", required=True, help="JSONL with keypoints2d")
    p.add_argument("--out", required=True)
    p.add_argument("--obj-dir", help="write a fitted OBJ mesh per sample")
    p.add_argument("--seed", type=int, default=0, help="reserved; fits are deterministic")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--gtol", type=float, default=1e-8)
    p.add_argument("--steptol", type=float, default=1e-10)
    p.add_argument("--trust-radius-init", type=float, default=1.0)
    p.add_argument("--single-stage", action="store_true",
                   help="skip the rigid view pre-alignment stage")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("mask", help="occlusion-aware hand mask from 2D joints")
    p.add_argument("--joints", required=True, help="JSON with a 'joints' array")
    p.add_argument("--image", required=True, help="PNG/PPM RGB image")
    p.add_argument("--out", required=True, help="output PNG (plus .rle.json sidecar)")
    p.add_argument("--band", type=float, default=70.0)
    p.add_argument("--gamma", type=float, default=50.0)
    p.add_argument("--components", type=int, default=5)
    p.add_argument("--iters", type=int, default=5)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("eval", help="PCK and mean-distance metrics")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--space", choices=("3d", "2d"), required=True)
    p.add_argument("--out", required=True, help="output prefix (.csv and .json)")
    p.add_argument("--root-index", type=int, default=0)
    p.add_argument("--thresholds", nargs="*", type=float)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-mesh", help="pose the model and write an OBJ")
    p.add_argument("--model", required=True)
    p.add_argument("--params", required=True, help='JSON {"beta": [...], "theta": [...]}')
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_mesh)

    p = sub.add_parser("model", help="inspect or convert model files")
    p.add_argument("action", choices=("info", "convert"))
    p.add_argument("path")
    p.add_argument("dest", nargs="?", help="output path for convert")
    p.set_defaults(func=cmd_model)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "model" and args.action == "convert" and not args.dest:
        parser.error("model convert requires a destination path")
    try:
        return args.func(args)
    except (ContractError, ModelLoadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except HandFitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
