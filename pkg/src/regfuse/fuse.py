"""Fusion of a registered infrared image with the visible image.

Feature decomposition is a fixed low-pass/high-pass split (Gaussian
smooth component plus residual detail). The default fusion rule is the
per-pixel maximum; `fuse_optimize` instead descends the fusion objective
directly over pixel values with projection to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .image import Image, gaussian_kernel
from .losses import FusionWeights, fusion_loss


@dataclass(frozen=True)
class FeatureDecomposition:
    """Smooth (low-pass) and detail (residual) components; their sum
    reconstructs the input to floating-point addition."""

    smooth: Image
    detail: Image


@dataclass(frozen=True)
class FuseConfig:
    sigma: float = 2.0
    mode: str = "max"  # "max" | "optimize"
    iterations: int = 40
    step: float = 0.05
    corr_epsilon: float = 1.01
    weights: FusionWeights = FusionWeights()
    max_halvings: int = 10

    def __post_init__(self):
        if self.mode not in ("max", "optimize"):
            raise ValueError(f"unknown fusion mode {self.mode!r}")
        if self.sigma <= 0 or self.step <= 0:
            raise ValueError("sigma and step must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")


def decompose(img: Image, sigma: float) -> FeatureDecomposition:
    """Gaussian low-pass component and its residual."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    k = gaussian_kernel(sigma)
    smooth = kernels.gaussian_blur_sep(img.data, k)
    return FeatureDecomposition(Image(smooth), Image(img.data - smooth))


def fuse_max(ir_warped: Image, vis: Image) -> Image:
    """Per-pixel maximum of the two inputs."""
    if (ir_warped.height, ir_warped.width) != (vis.height, vis.width):
        raise ValueError("image dimensions differ")
    return Image(np.maximum(ir_warped.data, vis.data))


def _loss_and_features(fused, ir_warped, vis, cfg):
    feats = (decompose(ir_warped, cfg.sigma), decompose(vis, cfg.sigma))
    val = fusion_loss(fused, ir_warped, vis, feats, cfg.corr_epsilon, cfg.weights)
    return val, feats


def fuse_optimize(
    ir_warped: Image, vis: Image, cfg: FuseConfig = FuseConfig(), trace: list | None = None
) -> Image:
    """Minimize the fusion objective by projected gradient descent.

    Starts from the per-pixel maximum. The intensity and gradient terms
    contribute sign subgradients (the Sobel term backpropagated through
    the transposed convolution); the feature-correlation term depends
    only on the source decompositions and is constant in the fused
    image. Iterates never increase the objective; the best iterate is
    returned, projected to [0, 1].
    """
    if (ir_warped.height, ir_warped.width) != (vis.height, vis.width):
        raise ValueError("image dimensions differ")
    cur = fuse_max(ir_warped, vis)
    n = cur.height * cur.width
    feats = (decompose(ir_warped, cfg.sigma), decompose(vis, cfg.sigma))

    def loss_of(img: Image) -> float:
        return fusion_loss(img, ir_warped, vis, feats, cfg.corr_epsilon, cfg.weights)

    f_cur = loss_of(cur)
    if not np.isfinite(f_cur):
        raise ValueError("fusion loss is not finite")
    if trace is not None:
        trace.append({"iter": 0, "term_name": "total", "value": float(f_cur)})
    best = cur
    f_best = f_cur

    target = np.maximum(ir_warped.data, vis.data)
    gx_t, gy_t = kernels.sobel_xy(ir_warped.data)
    gx_v, gy_v = kernels.sobel_xy(vis.data)
    gtarget = np.maximum(np.hypot(gx_t, gy_t), np.hypot(gx_v, gy_v))

    w = cfg.weights
    for it in range(1, cfg.iterations + 1):
        data = best.data
        grad = w.intensity * np.sign(data - target) / n
        gx, gy = kernels.sobel_xy(data)
        mag = np.hypot(gx, gy)
        s = np.sign(mag - gtarget) / n
        safe = np.where(mag > 0, mag, 1.0)
        gx_bar = w.gradient * s * gx / safe
        gy_bar = w.gradient * s * gy / safe
        grad = grad + kernels.sobel_adjoint(gx_bar, gy_bar)
        gmax = float(np.max(np.abs(grad)))
        if gmax == 0.0:
            break
        alpha = cfg.step / gmax
        accepted = False
        for _ in range(cfg.max_halvings):
            trial = Image(np.clip(data - alpha * grad, 0.0, 1.0))
            f_new = loss_of(trial)
            if f_new < f_best:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        best = trial
        f_best = f_new
        if trace is not None:
            trace.append({"iter": it, "term_name": "total", "value": float(f_best)})
    return best


def fuse(ir_warped: Image, vis: Image, cfg: FuseConfig = FuseConfig()) -> Image:
    """Fuse with the configured mode."""
    if cfg.mode == "max":
        return fuse_max(ir_warped, vis)
    return fuse_optimize(ir_warped, vis, cfg)
