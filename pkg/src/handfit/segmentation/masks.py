"""Binary hand masks and trimaps, plus their on-disk forms (PNG + RLE sidecar)."""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ContractError

# Trimap labels
BG = 0
FG = 1
UNDECIDED = 2


@dataclass
class Trimap:
    """Per-pixel three-way labels, shape (height, width), values in {BG, FG, UNDECIDED}."""

    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if self.labels.ndim != 2:
            raise ContractError("trimap labels must be a 2D array")
        if not np.isin(self.labels, (BG, FG, UNDECIDED)).all():
            raise ContractError("trimap labels must be BG, FG or UNDECIDED")

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass
class HandMask:
    """Occlusion-aware binary hand mask, shape (height, width), values in {0, 1}."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 2:
            raise ContractError("mask must be a 2D array")
        if not np.isin(self.pixels, (0, 1)).all():
            raise ContractError("mask values must be 0 or 1")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def is_empty(self) -> bool:
        return not self.pixels.any()


def mask_to_rle(mask: HandMask) -> dict:
    """Row-major run-length encoding: alternating run lengths starting with a 0-run."""
    flat = mask.pixels.ravel()
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat.size and flat[0] == 1:
        runs = [0] + runs
    return {"width": mask.width, "height": mask.height, "order": "row-major",
            "runs": runs}


def rle_to_mask(doc: dict) -> HandMask:
    total = doc["width"] * doc["height"]
    flat = np.zeros(total, dtype=np.uint8)
    pos, val = 0, 0
    for run in doc["runs"]:
        if val:
            flat[pos:pos + run] = 1
        pos += run
        val ^= 1
    if pos != total:
        raise ContractError("RLE runs do not cover the mask")
    return HandMask(flat.reshape(doc["height"], doc["width"]))


def save_mask_png(mask: HandMask, path: str | Path, rle_sidecar: bool = True):
    """Write the mask as an 8-bit PNG (0/255) plus a JSON RLE sidecar."""
    from PIL import Image

    Image.fromarray(mask.pixels * np.uint8(255), mode="L").save(path, format="PNG")
    if rle_sidecar:
        sidecar = Path(str(path) + ".rle.json")
        with open(sidecar, "w") as fh:
            json.dump(mask_to_rle(mask), fh)
            fh.write("\n")


def load_mask_png(path: str | Path) -> HandMask:
    from PIL import Image

    arr = np.asarray(Image.open(path).convert("L"))
    return HandMask((arr >= 128).astype(np.uint8))
