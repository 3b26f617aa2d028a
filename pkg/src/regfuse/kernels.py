"""Backend selection for the hot numeric kernels.

The numba backend is used by default. Set REGFUSE_DISABLE_NUMBA=1 (or
"true"/"yes"/"on") to force the pure-numpy fallback; it is also selected
automatically when numba cannot be imported. ``ACTIVE_BACKEND`` reports
which path is live. See benchmarks/bench_kernels.py for a comparison.
"""

from __future__ import annotations

import os

_FLAG = "REGFUSE_DISABLE_NUMBA"


def numba_disabled() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


def _select():
    if not numba_disabled():
        try:
            from . import _kernels_numba as impl

            return impl, "numba"
        except ImportError:
            pass
    from . import _kernels_numpy as impl

    return impl, "numpy"


_impl, ACTIVE_BACKEND = _select()

from ._kernels_numpy import sorted_offsets  # plain python, shared by backends

warp_bilinear = _impl.warp_bilinear
sobel_xy = _impl.sobel_xy
convolve_h = _impl.convolve_h
convolve_v = _impl.convolve_v
gaussian_blur_sep = _impl.gaussian_blur_sep
resize_bilinear = _impl.resize_bilinear
box_down2 = _impl.box_down2
densify_bilinear = _impl.densify_bilinear
edge_mask = _impl.edge_mask
match_edges = _impl.match_edges
residual_gap_mean = _impl.residual_gap_mean
smooth_value = _impl.smooth_value
invcons_value = _impl.invcons_value
mae_mse = _impl.mae_mse
ssim_mean = _impl.ssim_mean
sobel_adjoint = _impl.sobel_adjoint
gather_plane = _impl.gather_plane
gather_field = _impl.gather_field
