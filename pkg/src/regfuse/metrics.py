"""Fusion quality metrics.

Six standard measures: edge-preservation (qabf), visual information
fidelity for fusion (viff), and four single-image sharpness statistics
(spatial frequency, average gradient, mean gradient, edge intensity).
All are computed on intensities scaled to [0, 255] to match customary
magnitudes; degenerate zero-edge or zero-information inputs yield 0
rather than NaN.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .image import Image, gaussian_kernel

CSV_HEADER = "kind,level,path,Qabf,VIFF,SF,AG,MG,EI"

# sigmoid constants for the edge-preservation measure
QABF_GAMMA_G = 0.9994
QABF_KAPPA_G = -15.0
QABF_SIGMA_G = 0.5
QABF_GAMMA_A = 0.9879
QABF_KAPPA_A = -22.0
QABF_SIGMA_A = 0.8

VIFF_SCALES = 4
VIFF_BLOCK = 8
VIFF_NOISE = 2.0
VIFF_TINY = 1e-12


def _check_min(img: Image, side: int, name: str):
    if img.height < side or img.width < side:
        raise ValueError(f"image too small for {name} (needs at least {side}x{side})")


def _scaled(img: Image) -> np.ndarray:
    return img.data * 255.0


def ag(img: Image) -> float:
    """Average gradient: RMS of forward differences over shared pixels."""
    _check_min(img, 3, "ag")
    d = _scaled(img)
    gx = d[:-1, 1:] - d[:-1, :-1]
    gy = d[1:, :-1] - d[:-1, :-1]
    return float(np.mean(np.sqrt((gx * gx + gy * gy) / 2.0)))


def mg(img: Image) -> float:
    """Mean gradient: mean absolute forward difference."""
    _check_min(img, 3, "mg")
    d = _scaled(img)
    gx = np.abs(d[:-1, 1:] - d[:-1, :-1])
    gy = np.abs(d[1:, :-1] - d[:-1, :-1])
    return float(np.mean((gx + gy) / 2.0))


def ei(img: Image) -> float:
    """Edge intensity: mean Sobel magnitude."""
    _check_min(img, 3, "ei")
    gx, gy = kernels.sobel_xy(_scaled(img))
    return float(np.mean(np.hypot(gx, gy)))


def sf(img: Image) -> float:
    """Spatial frequency: RMS of row and column neighbor differences."""
    _check_min(img, 3, "sf")
    d = _scaled(img)
    rf = np.mean((d[:, 1:] - d[:, :-1]) ** 2)
    cf = np.mean((d[1:, :] - d[:-1, :]) ** 2)
    return float(np.sqrt(rf + cf))


def _sobel_strength_angle(plane: np.ndarray):
    gx, gy = kernels.sobel_xy(plane)
    g = np.hypot(gx, gy)
    ang = np.where(gx != 0.0, np.arctan(np.divide(gy, np.where(gx != 0.0, gx, 1.0))), np.pi / 2.0)
    return g, ang


def _preservation(ga, aa, gf, af):
    hi = np.maximum(ga, gf)
    lo = np.minimum(ga, gf)
    with np.errstate(invalid="ignore"):
        gratio = np.where(hi > 0.0, lo / np.where(hi > 0.0, hi, 1.0), 0.0)
    arel = 1.0 - np.abs(aa - af) / (np.pi / 2.0)
    qg = QABF_GAMMA_G / (1.0 + np.exp(QABF_KAPPA_G * (gratio - QABF_SIGMA_G)))
    qa = QABF_GAMMA_A / (1.0 + np.exp(QABF_KAPPA_A * (arel - QABF_SIGMA_A)))
    return np.sqrt(qg * qa)


def qabf(a: Image, b: Image, fused: Image) -> float:
    """Edge-information preservation of the fused image w.r.t. both
    sources: per-pixel strength/orientation preservation factors combined
    and averaged with edge-strength weights. Zero total edge weight
    (fully flat inputs) is defined as 0."""
    for other in (b, fused):
        if (other.height, other.width) != (a.height, a.width):
            raise ValueError("image dimensions differ")
    _check_min(a, 3, "qabf")
    ga, aa = _sobel_strength_angle(_scaled(a))
    gb, ab = _sobel_strength_angle(_scaled(b))
    gf, af = _sobel_strength_angle(_scaled(fused))
    qaf = _preservation(ga, aa, gf, af)
    qbf = _preservation(gb, ab, gf, af)
    wsum = float(np.sum(ga) + np.sum(gb))
    if wsum == 0.0:
        return 0.0
    return float((np.sum(qaf * ga) + np.sum(qbf * gb)) / wsum)


_VIFF_KERNEL = None


def _viff_kernel():
    global _VIFF_KERNEL
    if _VIFF_KERNEL is None:
        _VIFF_KERNEL = gaussian_kernel(1.0)
    return _VIFF_KERNEL


def _pyramid(plane: np.ndarray, scales: int):
    out = [plane]
    k = _viff_kernel()
    for _ in range(scales - 1):
        blurred = kernels.gaussian_blur_sep(out[-1], k)
        out.append(np.ascontiguousarray(blurred[::2, ::2]))
    return out


def _tiles(h, w, block):
    for y in range(0, h, block):
        for x in range(0, w, block):
            yield slice(y, min(y + block, h)), slice(x, min(x + block, w))


def _channel_info(x: np.ndarray, f: np.ndarray):
    """Per-tile visual information of the distorted/reference channel."""
    var_x = float(np.var(x))
    var_f = float(np.var(f))
    vind = float(np.log2(1.0 + var_x / VIFF_NOISE))
    if var_x <= VIFF_TINY:
        return 0.0, vind
    cov = float(np.mean(x * f) - x.mean() * f.mean())
    g = cov / var_x
    if g < 0.0:
        g = 0.0
        sv2 = var_f
    else:
        sv2 = var_f - g * cov
        if sv2 < 0.0:
            sv2 = 0.0
    vid = float(np.log2(1.0 + g * g * var_x / (sv2 + VIFF_NOISE)))
    return vid, vind


def viff(a: Image, b: Image, fused: Image) -> float:
    """Visual information fidelity of the fused image.

    Four Gaussian pyramid scales; per 8x8 tile (ragged remainder tiles
    included) a scalar gain/noise channel model relates each source to
    the fused image, and the source with the higher reference
    information is selected. The per-scale information ratios are
    averaged with equal weights. Zero-information references give 0.
    """
    for other in (b, fused):
        if (other.height, other.width) != (a.height, a.width):
            raise ValueError("image dimensions differ")
    if a.height < 16 or a.width < 16:
        raise ValueError("image too small for viff (needs at least 16x16)")
    pa = _pyramid(_scaled(a), VIFF_SCALES)
    pb = _pyramid(_scaled(b), VIFF_SCALES)
    pf = _pyramid(_scaled(fused), VIFF_SCALES)
    ratios = []
    for sa, sb, sfp in zip(pa, pb, pf):
        num = 0.0
        den = 0.0
        h, w = sa.shape
        for sy, sx in _tiles(h, w, VIFF_BLOCK):
            vid_a, vind_a = _channel_info(sa[sy, sx], sfp[sy, sx])
            vid_b, vind_b = _channel_info(sb[sy, sx], sfp[sy, sx])
            if vind_a >= vind_b:
                num += vid_a
                den += vind_a
            else:
                num += vid_b
                den += vind_b
        ratios.append(num / den if den > 0.0 else 0.0)
    return float(np.mean(ratios))


@dataclass(frozen=True)
class MetricReport:
    pair_id: str
    method: str
    kind: str
    level: int
    qabf: float
    viff: float
    sf: float
    ag: float
    mg: float
    ei: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        return cls(**json.loads(text))

    def csv_row(self) -> str:
        return (
            f"{self.kind},{self.level},{self.method},"
            f"{self.qabf:.6f},{self.viff:.6f},{self.sf:.6f},"
            f"{self.ag:.6f},{self.mg:.6f},{self.ei:.6f}"
        )


def evaluate_pair(
    ir_warped: Image,
    vis: Image,
    fused: Image,
    pair_id: str = "",
    method: str = "",
    kind: str = "",
    level: int = 0,
) -> MetricReport:
    """All six metrics: qabf/viff against both sources, sharpness
    statistics of the fused image alone."""
    return MetricReport(
        pair_id=pair_id,
        method=method,
        kind=kind,
        level=level,
        qabf=qabf(ir_warped, vis, fused),
        viff=viff(ir_warped, vis, fused),
        sf=sf(fused),
        ag=ag(fused),
        mg=mg(fused),
        ei=ei(fused),
    )
