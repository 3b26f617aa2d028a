"""Procedural test scenes.

Each scene is rendered twice: a "visible" variant with sharp shapes and
interior texture, and an "infrared" variant with inverted polarity and
mild blur. Shape boundaries coincide across the two variants, so edge
structure is shared while intensities are modality-like (anti-correlated
and differently sharp). Backgrounds are exactly constant, keeping the
effective-edge sets compact.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .image import Image, gaussian_kernel


IR_BACKGROUND = 0.05
VIS_BACKGROUND = 0.30
VIS_OFFSET = 0.25  # visible interiors sit this far above infrared ones


def make_scene(seed: int, size: int) -> tuple[Image, Image]:
    """One aligned (infrared, visible) pair of the given square size.

    Both variants share shape boundaries with equal edge jumps (the
    visible image is offset brighter overall), so fused edge strength
    matches either source when the pair is aligned, while misaligning
    the infrared image slides its edges under brighter visible interiors
    and lifts the dark side of visible edges.
    """
    if size < 32:
        raise ValueError("scene size must be at least 32")
    rng = np.random.default_rng(seed)
    mask = np.zeros((size, size))
    yy, xx = np.mgrid[0:size, 0:size]

    lo = int(size * 0.18)
    hi = int(size * 0.82)
    n_rects = 2 + size // 48
    for _ in range(n_rects):
        hh = int(rng.integers(size // 5, size // 3))
        ww = int(rng.integers(size // 5, size // 3))
        y0 = int(rng.integers(lo, max(lo + 1, hi - hh)))
        x0 = int(rng.integers(lo, max(lo + 1, hi - ww)))
        mask[y0 : y0 + hh, x0 : x0 + ww] = rng.uniform(0.55, 1.0)
    for _ in range(2):
        cy = int(rng.integers(lo + size // 10, hi - size // 10))
        cx = int(rng.integers(lo + size // 10, hi - size // 10))
        r = int(rng.integers(size // 9, size // 5))
        disk = (yy - cy) ** 2 + (xx - cx) ** 2 < r * r
        mask[disk] = rng.uniform(0.6, 1.0)

    inside = mask > 0
    interior = 0.5 + 0.2 * mask  # shared structure, [0.5, 0.7] inside shapes

    # equal blur on both variants keeps effective-edge bands equally wide,
    # so nearest-edge distances are unbiased across modalities
    k = gaussian_kernel(0.6)

    ir = np.full((size, size), IR_BACKGROUND)
    ir[inside] = interior[inside]
    ir = kernels.gaussian_blur_sep(ir, k)

    vis = np.full((size, size), VIS_BACKGROUND)
    vis[inside] = interior[inside] + VIS_OFFSET
    stripes = 0.05 * np.sin(xx / 2.6 + rng.uniform(0, np.pi)) * inside
    vis = np.clip(vis + stripes, 0.0, 1.0)
    vis = kernels.gaussian_blur_sep(vis, k)
    return Image(ir), Image(vis)


def generate_corpus(count: int, size: int, seed: int) -> list[tuple[str, Image, Image]]:
    """Deterministic list of (pair_id, infrared, visible) scenes."""
    out = []
    for i in range(count):
        ir, vis = make_scene(seed * 7919 + i, size)
        out.append((f"pair{i:02d}", ir, vis))
    return out
