"""Trimap construction from 2D joint annotations.

The foreground seed is the skeleton drawn as 1-pixel lines between connected
joints plus filled palm triangles; everything within a fixed Euclidean
distance of the seed (70 px by default) is left undecided; the rest is
background.  The distance band uses an exact two-pass squared Euclidean
distance transform so its labels agree with brute-force all-pairs distances.
"""

import numpy as np

from ..errors import ContractError
from .masks import BG, FG, UNDECIDED, Trimap

DEFAULT_BAND_PX = 70.0

_FAR = 1e18  # stands in for +inf in the distance transform parabola math


def bresenham_line(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Integer pixel chain between two endpoints, inclusive, 1 px wide."""
    points = []
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        points.append((x, y))
        if x == x1 and y == y1:
            return points
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


def fill_triangle(vertices: np.ndarray, width: int, height: int) -> list[tuple[int, int]]:
    """Scanline fill of a triangle given float (x, y) vertices; clipped to bounds."""
    v = np.asarray(vertices, dtype=float).reshape(3, 2)
    y_lo = max(0, int(np.ceil(v[:, 1].min())))
    y_hi = min(height - 1, int(np.floor(v[:, 1].max())))
    out = []
    for y in range(y_lo, y_hi + 1):
        xs = []
        for a, b in ((0, 1), (1, 2), (2, 0)):
            ya, yb = v[a, 1], v[b, 1]
            if ya == yb:
                if ya == y:  # horizontal edge on this scanline
                    xs.extend([v[a, 0], v[b, 0]])
                continue
            t = (y - ya) / (yb - ya)
            if 0.0 <= t <= 1.0:
                xs.append(v[a, 0] + t * (v[b, 0] - v[a, 0]))
        if not xs:
            continue
        x_lo = max(0, int(np.ceil(min(xs))))
        x_hi = min(width - 1, int(np.floor(max(xs))))
        out.extend((x, y) for x in range(x_lo, x_hi + 1))
    return out


def _edt_1d(f: np.ndarray) -> np.ndarray:
    """Exact 1D squared distance transform of a sampled function (lower envelope)."""
    n = f.shape[0]
    d = np.empty(n)
    v = np.zeros(n, dtype=np.int64)
    z = np.empty(n + 1)
    z[0], z[1] = -_FAR, _FAR
    k = 0
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2 * q - 2 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2 * q - 2 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = _FAR
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d[q] = (q - v[k]) ** 2 + f[v[k]]
    return d


def distance_transform(seed: np.ndarray) -> np.ndarray:
    """Exact Euclidean squared distance to the nearest true pixel (two 1D passes)."""
    seed = np.asarray(seed, dtype=bool)
    h, w = seed.shape
    d = np.where(seed, 0.0, _FAR)
    for x in range(w):
        d[:, x] = _edt_1d(d[:, x])
    for y in range(h):
        d[y, :] = _edt_1d(d[y, :])
    return d


def build_trimap(joints2d: np.ndarray, skeleton_edges, palm_tris,
                 image_size, band_px: float = DEFAULT_BAND_PX) -> Trimap:
    """Trimap from 2D joints: skeleton + palm foreground, distance band undecided.

    Args:
        joints2d: (n, 2) pixel coordinates (x, y).
        skeleton_edges: iterable of (i, j) joint index pairs to connect.
        palm_tris: iterable of (i, j, k) joint index triples filled as palm.
        image_size: (width, height) or a single int for a square image.
        band_px: undecided band radius around the foreground, in pixels.
    """
    joints = np.asarray(joints2d, dtype=float).reshape(-1, 2)
    if isinstance(image_size, int):
        width = height = image_size
    else:
        width, height = int(image_size[0]), int(image_size[1])

    fg = np.zeros((height, width), dtype=bool)
    rounded = np.rint(joints).astype(np.int64)
    for a, b in skeleton_edges:
        for x, y in bresenham_line(*rounded[a], *rounded[b]):
            if 0 <= x < width and 0 <= y < height:
                fg[y, x] = True
    for tri in palm_tris:
        for x, y in fill_triangle(joints[list(tri)], width, height):
            fg[y, x] = True
    if not fg.any():
        raise ContractError("no foreground pixel falls inside the image")

    labels = np.full((height, width), BG, dtype=np.uint8)
    dist2 = distance_transform(fg)
    labels[dist2 <= band_px * band_px] = UNDECIDED
    labels[fg] = FG
    return Trimap(labels)
