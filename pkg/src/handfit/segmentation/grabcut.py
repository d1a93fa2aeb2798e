"""GrabCut-style iterative segmentation seeded by a trimap.

Each iteration refits per-region color GMMs on the current assignment (EM,
warm-started from the previous models so the mixture likelihood cannot get
worse), then solves an s-t min-cut whose data terms are negative GMM
log-likelihoods and whose smoothness terms are contrast-sensitive.  Hard
trimap labels are never flipped; only undecided pixels enter the graph.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError
from .masks import BG, FG, UNDECIDED, HandMask, Trimap
from .maxflow import FlowGraph, max_flow

log = logging.getLogger(__name__)

COV_FLOOR = 1e-3
_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class GrabCutOptions:
    n_components: int = 5
    max_iters: int = 5
    gamma: float = 50.0
    em_steps: int = 3


@dataclass
class GrabCutResult:
    mask: HandMask
    energies: list[float] = field(default_factory=list)
    iterations: int = 0


class Gmm:
    """Full-covariance Gaussian mixture over RGB pixels, deterministic fit."""

    def __init__(self, weights, means, covs):
        self.weights = np.asarray(weights, dtype=float)
        self.means = np.asarray(means, dtype=float)
        self.covs = np.asarray(covs, dtype=float)
        self._floor_covariances()

    def _floor_covariances(self):
        for i in range(self.covs.shape[0]):
            try:
                np.linalg.cholesky(self.covs[i])
                ok = np.linalg.det(self.covs[i]) > 1e-12
            except np.linalg.LinAlgError:
                ok = False
            if not ok:
                log.warning("singular GMM covariance, flooring with %g * I", COV_FLOOR)
                self.covs[i] = self.covs[i] + COV_FLOOR * np.eye(3)

    @classmethod
    def fit(cls, pixels: np.ndarray, n_components: int) -> "Gmm":
        """Deterministic k-means seeding (quantile split along the principal
        axis, then Lloyd iterations) followed by moment estimates."""
        pix = np.asarray(pixels, dtype=float).reshape(-1, 3)
        k = max(1, min(n_components, pix.shape[0]))
        centered = pix - pix.mean(axis=0)
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        proj = centered @ vt[0]
        order = np.argsort(proj, kind="stable")
        chunks = np.array_split(order, k)
        centers = np.stack([pix[c].mean(axis=0) for c in chunks])
        labels = np.zeros(pix.shape[0], dtype=np.int64)
        for _ in range(10):
            d2 = ((pix[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new_labels = d2.argmin(axis=1)
            if (new_labels == labels).all():
                break
            labels = new_labels
            for i in range(k):
                sel = labels == i
                if sel.any():
                    centers[i] = pix[sel].mean(axis=0)
        weights = np.zeros(k)
        means = np.zeros((k, 3))
        covs = np.tile(np.eye(3) * COV_FLOOR, (k, 1, 1))
        for i in range(k):
            sel = labels == i
            cnt = int(sel.sum())
            weights[i] = cnt / pix.shape[0]
            if cnt:
                means[i] = pix[sel].mean(axis=0)
                covs[i] = np.cov(pix[sel].T, bias=True) if cnt > 1 else np.zeros((3, 3))
        weights = weights / weights.sum()
        return cls(weights, means, covs)

    def _component_log_prob(self, pix: np.ndarray) -> np.ndarray:
        """(n, k) per-component log densities including the mixture weights."""
        n, k = pix.shape[0], self.weights.shape[0]
        out = np.empty((n, k))
        for i in range(k):
            chol = np.linalg.cholesky(self.covs[i])
            diff = pix - self.means[i]
            sol = np.linalg.solve(chol, diff.T)
            maha = (sol ** 2).sum(axis=0)
            logdet = 2.0 * np.log(np.diag(chol)).sum()
            logw = np.log(self.weights[i]) if self.weights[i] > 0 else -np.inf
            out[:, i] = logw - 0.5 * (maha + logdet + 3 * _LOG_2PI)
        return out

    def log_prob(self, pixels: np.ndarray) -> np.ndarray:
        """Mixture log-likelihood per pixel (logsumexp over components)."""
        comp = self._component_log_prob(np.asarray(pixels, dtype=float).reshape(-1, 3))
        m = comp.max(axis=1, keepdims=True)
        return (m + np.log(np.exp(comp - m).sum(axis=1, keepdims=True))).ravel()

    def em_refit(self, pixels: np.ndarray, steps: int) -> "Gmm":
        """Soft-EM updates warm-started from this model (likelihood non-decreasing)."""
        pix = np.asarray(pixels, dtype=float).reshape(-1, 3)
        gmm = self
        for _ in range(steps):
            comp = gmm._component_log_prob(pix)
            m = comp.max(axis=1, keepdims=True)
            resp = np.exp(comp - m)
            resp /= resp.sum(axis=1, keepdims=True)
            nk = resp.sum(axis=0)
            weights = nk / nk.sum()
            means = np.where(nk[:, None] > 0,
                             (resp.T @ pix) / np.maximum(nk[:, None], 1e-300),
                             gmm.means)
            covs = np.empty_like(gmm.covs)
            for i in range(nk.shape[0]):
                if nk[i] <= 0:
                    covs[i] = gmm.covs[i]
                    continue
                diff = pix - means[i]
                covs[i] = (resp[:, i][:, None] * diff).T @ diff / nk[i]
            gmm = Gmm(weights, means, covs)
        return gmm


def _pair_indices(h: int, w: int) -> list[tuple[np.ndarray, np.ndarray, float]]:
    """Flat (p, q, distance) index arrays for the 4 directions of 8-connectivity."""
    out = []
    for dy, dx, dist in ((0, 1, 1.0), (1, 0, 1.0),
                         (1, 1, float(np.sqrt(2.0))), (1, -1, float(np.sqrt(2.0)))):
        ys, xs = np.mgrid[max(0, -dy):h - max(0, dy), max(0, -dx):w - max(0, dx)]
        p = (ys * w + xs).ravel()
        q = ((ys + dy) * w + (xs + dx)).ravel()
        out.append((p, q, dist))
    return out


def _smoothness(flat: np.ndarray, gamma: float, pairs) -> list[np.ndarray]:
    """Contrast-sensitive pair weights gamma * exp(-beta |c_p - c_q|^2) / dist."""
    d2 = [((flat[p] - flat[q]) ** 2).sum(axis=1) for p, q, _ in pairs]
    total = sum(float(d.sum()) for d in d2)
    count = sum(d.size for d in d2)
    mean = total / count if count else 0.0
    beta = 1.0 / (2.0 * mean) if mean > 0 else 0.0
    return [gamma * np.exp(-beta * d) / dist for d, (_, _, dist) in zip(d2, pairs)]


def _energy(flat, labels_flat, fg_gmm, bg_gmm, pairs, pair_weights) -> float:
    fg_sel = labels_flat == 1
    data = 0.0
    if fg_sel.any():
        data -= float(fg_gmm.log_prob(flat[fg_sel]).sum())
    if (~fg_sel).any():
        data -= float(bg_gmm.log_prob(flat[~fg_sel]).sum())
    smooth = 0.0
    for wv, (p, q, _) in zip(pair_weights, pairs):
        smooth += float(wv[labels_flat[p] != labels_flat[q]].sum())
    return data + smooth


def grabcut(image: np.ndarray, trimap: Trimap,
            options: GrabCutOptions | None = None) -> GrabCutResult:
    """Segment an RGB image given a trimap; only UNDECIDED pixels are inferred."""
    options = options or GrabCutOptions()
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ContractError(f"expected an H x W x 3 RGB image, got {img.shape}")
    if img.shape[:2] != trimap.labels.shape:
        raise ContractError("image and trimap sizes differ")
    tl = trimap.labels
    tflat = tl.ravel()
    if not (tflat == FG).any() or not (tflat == BG).any():
        raise ContractError("trimap must contain both foreground and background seeds")

    h, w = tl.shape
    flat = img.reshape(-1, 3).astype(float)
    undecided = np.flatnonzero(tflat == UNDECIDED)
    node_of = np.full(h * w, -1, dtype=np.int64)
    node_of[undecided] = np.arange(undecided.size)

    pairs = _pair_indices(h, w)
    pair_weights = _smoothness(flat, options.gamma, pairs)

    # Undecided pixels start as foreground.
    labels = (tflat != BG).astype(np.uint8)
    fg_gmm = Gmm.fit(flat[labels == 1], options.n_components)
    bg_gmm = Gmm.fit(flat[labels == 0], options.n_components)

    energies: list[float] = []
    iterations = 0
    for it in range(options.max_iters):
        iterations = it + 1
        if it > 0:
            fg_gmm = fg_gmm.em_refit(flat[labels == 1], options.em_steps)
            bg_gmm = bg_gmm.em_refit(flat[labels == 0], options.em_steps)

        new_labels = labels.copy()
        if undecided.size:
            d_fg = -fg_gmm.log_prob(flat[undecided])  # cost of labeling FG
            d_bg = -bg_gmm.log_prob(flat[undecided])  # cost of labeling BG
            # Densities above 1 make -log negative; shifting both terminal
            # links of a pixel by a constant leaves the optimal cut unchanged.
            shift = np.minimum(d_fg, d_bg)
            source, sink = undecided.size, undecided.size + 1
            g = FlowGraph(undecided.size + 2)
            src_cap = d_bg - shift  # paid when the pixel ends up background
            snk_cap = d_fg - shift  # paid when the pixel ends up foreground
            inter = []
            for wv, (p, q, _) in zip(pair_weights, pairs):
                pu, qu = node_of[p], node_of[q]
                both = (pu >= 0) & (qu >= 0)
                inter.append((pu[both], qu[both], wv[both]))
                # A hard-labelled neighbour folds into the matching terminal.
                for un, other_lab in ((pu, tflat[q]), (qu, tflat[p])):
                    sel = (un >= 0)
                    sel_fg = sel & (other_lab == FG)
                    sel_bg = sel & (other_lab == BG)
                    np.add.at(src_cap, un[sel_fg], wv[sel_fg])
                    np.add.at(snk_cap, un[sel_bg], wv[sel_bg])
            for i in range(undecided.size):
                g.add_edge(source, i, src_cap[i])
                g.add_edge(i, sink, snk_cap[i])
            for pu, qu, wv in inter:
                for a, b, c in zip(pu.tolist(), qu.tolist(), wv.tolist()):
                    g.add_edge(a, b, c, c)
            _, source_side = max_flow(g, source, sink)
            new_labels[undecided] = source_side[:undecided.size].astype(np.uint8)

        energies.append(_energy(flat, new_labels, fg_gmm, bg_gmm, pairs, pair_weights))
        changed = (new_labels != labels).any()
        labels = new_labels
        if not changed:
            break

    return GrabCutResult(mask=HandMask(labels.reshape(h, w)), energies=energies,
                         iterations=iterations)
