"""Occlusion-aware hand mask generation: trimap seeding plus GrabCut refinement."""

from .grabcut import GrabCutOptions, GrabCutResult, Gmm, grabcut
from .masks import (BG, FG, UNDECIDED, HandMask, Trimap, load_mask_png,
                    mask_to_rle, rle_to_mask, save_mask_png)
from .maxflow import FlowGraph, max_flow
from .trimap import (DEFAULT_BAND_PX, bresenham_line, build_trimap,
                     distance_transform, fill_triangle)

__all__ = [
    "BG", "FG", "UNDECIDED",
    "Trimap", "HandMask",
    "build_trimap", "bresenham_line", "fill_triangle", "distance_transform",
    "DEFAULT_BAND_PX",
    "FlowGraph", "max_flow",
    "Gmm", "GrabCutOptions", "GrabCutResult", "grabcut",
    "mask_to_rle", "rle_to_mask", "save_mask_png", "load_mask_png",
]
