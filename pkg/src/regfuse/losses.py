"""Objective terms for registration and fusion.

All losses are pure functions of their inputs and operate on the [0, 1]
intensity range. The edge-match loss compares, for every effective edge
pixel of the moving image, the offset and orientation of its nearest
effective edge in the fixed image against the same quantities measured
in the aligned image; the remaining terms are conventional photometric,
smoothness, and consistency penalties.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .image import DisplacementField, Image

SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


@dataclass(frozen=True)
class LossConfig:
    edge_threshold: float = 1e-4
    match_radius: int = 7
    l1_weight: float = 5.0
    l2_weight: float = 1.0
    corr_epsilon: float = 1.01

    def __post_init__(self):
        if self.edge_threshold <= 0:
            raise ValueError("edge_threshold must be positive")
        if self.match_radius < 1:
            raise ValueError("match_radius must be at least 1")
        if self.l1_weight < 0 or self.l2_weight < 0:
            raise ValueError("weights must be non-negative")
        if self.corr_epsilon <= 1:
            raise ValueError("corr_epsilon must be greater than 1")


@dataclass(frozen=True)
class EffectiveEdgeSet:
    """Pixels whose Sobel magnitude strictly exceeds the threshold."""

    pixels: tuple  # of (x, y, magnitude, angle)

    @property
    def count(self) -> int:
        return len(self.pixels)


class EdgeMatchTerms(NamedTuple):
    total: float
    distance: float
    angle: float
    matched: int


def effective_edges(img: Image, threshold: float) -> EffectiveEdgeSet:
    if img.height < 3 or img.width < 3:
        raise ValueError("image too small for edge extraction")
    gx, gy = kernels.sobel_xy(img.data)
    mag = np.hypot(gx, gy)
    ys, xs = np.nonzero(mag > threshold)
    ang = np.arctan2(gy[ys, xs], gx[ys, xs])
    pixels = tuple(
        (int(x), int(y), float(m), float(a))
        for x, y, m, a in zip(xs, ys, mag[ys, xs], ang)
    )
    return EffectiveEdgeSet(pixels)


def _edge_data(plane: np.ndarray, threshold: float):
    gx, gy = kernels.sobel_xy(plane)
    mask = kernels.edge_mask(gx, gy, threshold)
    return mask, gx, gy


def _anchors(plane: np.ndarray, threshold: float):
    mask, gx, gy = _edge_data(plane, threshold)
    ys, xs = np.nonzero(mask)
    ys = ys.astype(np.int64)
    xs = xs.astype(np.int64)
    angs = np.arctan2(gy[ys, xs], gx[ys, xs])
    return ys, xs, angs


def edge_match_loss(
    moving: Image, fixed: Image, aligned: Image, cfg: LossConfig
) -> EdgeMatchTerms:
    """Neighborhood edge distance/orientation consistency.

    Anchored on the effective edges of ``moving``: each anchor is matched
    to its nearest effective edge of ``fixed`` and, separately, of
    ``aligned`` (Euclidean nearest within the match radius, ties broken
    in row-major scan order). The distance term averages the squared gap
    between the two match offsets, the angle term the absolute gap
    between the two orientation differences. Anchors missing either
    match are skipped; with no matched anchors the loss is zero.
    """
    for other in (fixed, aligned):
        if (other.height, other.width) != (moving.height, moving.width):
            raise ValueError("image dimensions differ")
    ays, axs, angs = _anchors(moving.data, cfg.edge_threshold)
    if len(ays) == 0:
        return EdgeMatchTerms(0.0, 0.0, 0.0, 0)
    offsets = kernels.sorted_offsets(cfg.match_radius)
    fmask, fgx, fgy = _edge_data(fixed.data, cfg.edge_threshold)
    f1, p1, q1 = kernels.match_edges(ays, axs, angs, fmask, fgx, fgy, offsets)
    amask, agx, agy = _edge_data(aligned.data, cfg.edge_threshold)
    f2, p2, q2 = kernels.match_edges(ays, axs, angs, amask, agx, agy, offsets)
    sel = (f1 != 0) & (f2 != 0)
    m = int(np.count_nonzero(sel))
    if m == 0:
        return EdgeMatchTerms(0.0, 0.0, 0.0, 0)
    dp = p1[sel] - p2[sel]
    dist = float(np.mean(dp * dp))
    ang = float(np.mean(np.abs(q1[sel] - q2[sel])))
    return EdgeMatchTerms(dist + ang, dist, ang, m)


def residual_preservation_loss(moving: Image, fixed: Image, aligned: Image) -> float:
    """Mean absolute gap between post- and pre-alignment squared residuals."""
    for other in (fixed, aligned):
        if (other.height, other.width) != (moving.height, moving.width):
            raise ValueError("image dimensions differ")
    return kernels.residual_gap_mean(moving.data, fixed.data, aligned.data)


def smoothness_loss(fld: DisplacementField) -> float:
    """Mean squared forward differences of both field components."""
    if fld.height < 2 or fld.width < 2:
        raise ValueError("field too small for finite differences")
    return kernels.smooth_value(fld.dx, fld.dy)


def inverse_consistency_loss(forward: DisplacementField, reverse: DisplacementField) -> float:
    """Mean squared residual of composing the two directional fields."""
    if (forward.height, forward.width) != (reverse.height, reverse.width):
        raise ValueError("field dimensions differ")
    return kernels.invcons_value(forward.dx, forward.dy, reverse.dx, reverse.dy)


def branch_consistency_loss(a, b, cfg: LossConfig) -> float:
    """L1+L2 agreement between two registration branches.

    ``a`` and ``b`` expose ir_warped, vis_warped, ir_recon, vis_recon
    (Image) and flow_ir, flow_vis (DisplacementField); the second branch
    is expected to be already mapped back into globally comparable form.
    Contributions: for each paired tensor, l1_weight * MAE + l2_weight *
    MSE (field pairs average their two component planes).
    """
    total_l1 = 0.0
    total_l2 = 0.0
    for pa, pb in (
        (a.ir_warped, b.ir_warped),
        (a.vis_warped, b.vis_warped),
        (a.ir_recon, b.ir_recon),
        (a.vis_recon, b.vis_recon),
    ):
        if (pa.height, pa.width) != (pb.height, pb.width):
            raise ValueError("branch image dimensions differ")
        l1, l2 = kernels.mae_mse(pa.data, pb.data)
        total_l1 += l1
        total_l2 += l2
    for fa, fb in ((a.flow_ir, b.flow_ir), (a.flow_vis, b.flow_vis)):
        if (fa.height, fa.width) != (fb.height, fb.width):
            raise ValueError("branch field dimensions differ")
        l1x, l2x = kernels.mae_mse(fa.dx, fb.dx)
        l1y, l2y = kernels.mae_mse(fa.dy, fb.dy)
        total_l1 += 0.5 * (l1x + l1y)
        total_l2 += 0.5 * (l2x + l2y)
    return cfg.l1_weight * total_l1 + cfg.l2_weight * total_l2


def ssim(a: Image, b: Image) -> float:
    """Windowed SSIM (11x11 Gaussian window, sigma 1.5) on [0, 1] images."""
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError("image dimensions differ")
    if a.height < SSIM_WINDOW or a.width < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    k = _ssim_kernel()
    return kernels.ssim_mean(a.data, b.data, k, SSIM_C1, SSIM_C2)


_SSIM_K = None


def _ssim_kernel() -> np.ndarray:
    global _SSIM_K
    if _SSIM_K is None:
        xs = np.arange(SSIM_WINDOW, dtype=np.float64) - (SSIM_WINDOW - 1) / 2.0
        k = np.exp(-(xs * xs) / (2.0 * SSIM_SIGMA * SSIM_SIGMA))
        _SSIM_K = k / k.sum()
    return _SSIM_K


def reconstruction_loss(aligned: Image, recon: Image) -> float:
    """1 - SSIM plus mean squared error between an image and its
    reconstruction."""
    _, mse = kernels.mae_mse(aligned.data, recon.data)
    return 1.0 - ssim(aligned, recon) + mse


def correlation(a: Image, b: Image) -> float:
    """Pearson correlation over pixels; zero-variance inputs give 0."""
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError("image dimensions differ")
    x = a.data - a.data.mean()
    y = b.data - b.data.mean()
    den = float(np.sqrt(np.sum(x * x) * np.sum(y * y)))
    if den == 0.0:
        return 0.0
    return float(np.sum(x * y) / den)


def feature_correlation_loss(
    smooth_a: Image, smooth_b: Image, detail_a: Image, detail_b: Image, epsilon: float
) -> float:
    """Squared low-pass correlation over shifted high-pass correlation.

    Encourages shared smooth structure across modalities while letting
    detail components decorrelate. epsilon > 1 keeps the denominator
    positive, bounding the loss to [0, 1/(epsilon-1)].
    """
    if epsilon <= 1:
        raise ValueError("epsilon must be greater than 1")
    cg = correlation(smooth_a, smooth_b)
    cl = correlation(detail_a, detail_b)
    return cg * cg / (cl + epsilon)


@dataclass(frozen=True)
class FusionWeights:
    correlation: float = 1.0
    intensity: float = 1.0
    gradient: float = 1.0


def sobel_magnitude(img: Image) -> np.ndarray:
    gx, gy = kernels.sobel_xy(img.data)
    return np.hypot(gx, gy)


def fusion_loss(
    fused: Image,
    ir: Image,
    vis: Image,
    features,
    epsilon: float = 1.01,
    weights: FusionWeights = FusionWeights(),
) -> float:
    """Fusion objective: feature-correlation term plus L1 matching of the
    fused image and its Sobel magnitude against the per-pixel maxima of
    the source images. ``features`` is the (ir, vis) decomposition pair.
    """
    for other in (ir, vis):
        if (other.height, other.width) != (fused.height, fused.width):
            raise ValueError("image dimensions differ")
    dec_ir, dec_vis = features
    corr_term = feature_correlation_loss(
        dec_ir.smooth, dec_vis.smooth, dec_ir.detail, dec_vis.detail, epsilon
    )
    target = np.maximum(ir.data, vis.data)
    inten = float(np.mean(np.abs(fused.data - target)))
    gtarget = np.maximum(sobel_magnitude(ir), sobel_magnitude(vis))
    grad = float(np.mean(np.abs(sobel_magnitude(fused) - gtarget)))
    return (
        weights.correlation * corr_term
        + weights.intensity * inten
        + weights.gradient * grad
    )
