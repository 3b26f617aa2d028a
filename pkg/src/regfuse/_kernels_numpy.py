"""Pure-numpy implementations of the hot numeric kernels.

This is the fallback backend selected when numba is unavailable or
REGFUSE_DISABLE_NUMBA is set. Semantics are identical to the numba
backend; elementwise results match bitwise, reductions match to
floating-point summation-order noise (~1e-15 relative).

All kernels take and return plain 2-D float64 arrays (row-major,
``a[y, x]`` indexing). Border handling is clamp-to-edge throughout.
"""

from __future__ import annotations

import numpy as np


def warp_bilinear(img, dx, dy):
    """Backward warp: out[y, x] = bilinear sample of img at (x + dx, y + dy).

    Sample positions are clamped to the image rectangle, so out-of-bounds
    reads return the border pixel. Integer displacements reproduce pixel
    values exactly (no interpolation arithmetic is applied when the
    fractional part is zero).
    """
    h, w = img.shape
    ys, xs = np.mgrid[0:h, 0:w]

    fdx = np.floor(dx)
    fx = dx - fdx
    x0 = xs + fdx.astype(np.int64)
    fdy = np.floor(dy)
    fy = dy - fdy
    y0 = ys + fdy.astype(np.int64)

    # Clamp: fully out-of-range samples collapse to the border pixel with
    # zero fractional weight so the border value is returned exactly.
    lo_x = x0 < 0
    hi_x = x0 >= w - 1
    x0 = np.clip(x0, 0, w - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    fx = np.where(lo_x | hi_x, 0.0, fx)

    lo_y = y0 < 0
    hi_y = y0 >= h - 1
    y0 = np.clip(y0, 0, h - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    fy = np.where(lo_y | hi_y, 0.0, fy)

    v00 = img[y0, x0]
    v01 = img[y0, x1]
    v10 = img[y1, x0]
    v11 = img[y1, x1]
    top = v00 + fx * (v01 - v00)
    bot = v10 + fx * (v11 - v10)
    return top + fy * (bot - top)


def sobel_xy(img):
    """3x3 Sobel derivatives with replicate-padded borders.

    Returns (gx, gy); gx grows to the right, gy grows downward.
    """
    p = np.pad(img, 1, mode="edge")
    tl = p[:-2, :-2]
    tc = p[:-2, 1:-1]
    tr = p[:-2, 2:]
    ml = p[1:-1, :-2]
    mr = p[1:-1, 2:]
    bl = p[2:, :-2]
    bc = p[2:, 1:-1]
    br = p[2:, 2:]
    gx = (tr - tl) + 2.0 * (mr - ml) + (br - bl)
    gy = (bl - tl) + 2.0 * (bc - tc) + (br - tr)
    return gx, gy


def convolve_h(img, kernel):
    """Horizontal 1-D correlation with replicate padding."""
    r = (len(kernel) - 1) // 2
    p = np.pad(img, ((0, 0), (r, r)), mode="edge")
    out = np.zeros_like(img)
    for i, kv in enumerate(kernel):
        out += kv * p[:, i : i + img.shape[1]]
    return out


def convolve_v(img, kernel):
    """Vertical 1-D correlation with replicate padding."""
    r = (len(kernel) - 1) // 2
    p = np.pad(img, ((r, r), (0, 0)), mode="edge")
    out = np.zeros_like(img)
    for i, kv in enumerate(kernel):
        out += kv * p[i : i + img.shape[0], :]
    return out


def gaussian_blur_sep(img, kernel):
    """Separable blur: horizontal then vertical pass of a 1-D kernel."""
    return convolve_v(convolve_h(img, kernel), kernel)


def resize_bilinear(img, oh, ow):
    """Bilinear resize with half-pixel-center coordinate mapping."""
    h, w = img.shape
    sy = h / oh
    sx = w / ow
    xs = (np.arange(ow) + 0.5) * sx - 0.5
    ys = (np.arange(oh) + 0.5) * sy - 0.5
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.minimum(x0, w - 1)
    y0 = np.minimum(y0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0

    ia = img[np.ix_(y0, x0)]
    ib = img[np.ix_(y0, x1)]
    ic = img[np.ix_(y1, x0)]
    id_ = img[np.ix_(y1, x1)]
    fxg = fx[None, :]
    fyg = fy[:, None]
    top = ia + fxg * (ib - ia)
    bot = ic + fxg * (id_ - ic)
    return top + fyg * (bot - top)


def box_down2(img):
    """Downsample by 2 with 2x2 block averaging (dims must be even)."""
    h, w = img.shape
    return 0.25 * (
        img[0:h:2, 0:w:2] + img[0:h:2, 1:w:2] + img[1:h:2, 0:w:2] + img[1:h:2, 1:w:2]
    )


def densify_bilinear(params, h, w):
    """Bilinear upsampling of a control grid to a dense field.

    ``params`` is (gh, gw, 2) with displacement (dx, dy) at each control
    point; control points span the image corners, so the dense field is
    exact at control-point locations.
    """
    gh, gw = params.shape[0], params.shape[1]
    xs = np.arange(w) * ((gw - 1) / (w - 1)) if w > 1 else np.zeros(w)
    ys = np.arange(h) * ((gh - 1) / (h - 1)) if h > 1 else np.zeros(h)
    x0 = np.minimum(np.floor(xs).astype(np.int64), gw - 2)
    y0 = np.minimum(np.floor(ys).astype(np.int64), gh - 2)
    fx = (xs - x0)[None, :, None]
    fy = (ys - y0)[:, None, None]
    pa = params[np.ix_(y0, x0)]
    pb = params[np.ix_(y0, x0 + 1)]
    pc = params[np.ix_(y0 + 1, x0)]
    pd = params[np.ix_(y0 + 1, x0 + 1)]
    top = pa + fx * (pb - pa)
    bot = pc + fx * (pd - pc)
    dense = top + fy * (bot - top)
    return np.ascontiguousarray(dense[:, :, 0]), np.ascontiguousarray(dense[:, :, 1])


def edge_mask(gx, gy, threshold):
    """Effective-edge mask: Sobel magnitude strictly above threshold."""
    return ((gx * gx + gy * gy) > threshold * threshold).astype(np.uint8)


def _fold_angle(diff):
    """Fold an angle difference to [0, pi/2] (orientation, sign-free)."""
    d = np.abs(diff)
    d = np.where(d > np.pi, 2.0 * np.pi - d, d)
    return np.where(d > 0.5 * np.pi, np.pi - d, d)


def sorted_offsets(radius):
    """Window offsets ordered by (distance, row-major scan order).

    Scanning matches in this order makes the first hit the Euclidean
    nearest with ties resolved in row-major window order.
    """
    offs = [
        (dy * dy + dx * dx, dy, dx)
        for dy in range(-radius, radius + 1)
        for dx in range(-radius, radius + 1)
    ]
    offs.sort()
    return np.array([(dy, dx) for _, dy, dx in offs], dtype=np.int64)


def match_edges(ays, axs, aangs, tmask, tgx, tgy, offsets):
    """Nearest effective-edge match within a square neighborhood.

    For each anchor pixel (ays[i], axs[i]) the closest set pixel of
    ``tmask`` is selected among the given distance-sorted window
    ``offsets`` (Euclidean distance, ties broken by row-major scan order
    of the window).

    Returns (found, dist, angdiff): match indicator, Euclidean offset
    length, and the sign-free orientation difference between the anchor
    angle and the matched pixel's Sobel orientation.
    """
    h, w = tmask.shape
    m = ays.shape[0]
    found = np.zeros(m, dtype=bool)
    my = np.zeros(m, dtype=np.int64)
    mx = np.zeros(m, dtype=np.int64)
    dist = np.zeros(m)
    idx = np.arange(m)
    for k in range(offsets.shape[0]):
        if idx.size == 0:
            break
        dy = offsets[k, 0]
        dx = offsets[k, 1]
        yy = ays[idx] + dy
        xx = axs[idx] + dx
        ok = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        okc = ok.copy()
        okc[ok] = tmask[yy[ok], xx[ok]] != 0
        hit = idx[okc]
        if hit.size:
            found[hit] = True
            my[hit] = ays[hit] + dy
            mx[hit] = axs[hit] + dx
            dist[hit] = np.sqrt(float(dy * dy + dx * dx))
            idx = idx[~okc]
    tang = np.arctan2(tgy[my, mx], tgx[my, mx])
    angdiff = np.where(found, _fold_angle(aangs - tang), 0.0)
    return found.astype(np.uint8), dist, angdiff


def gather_plane(plane, gy, gx):
    """out[p] = plane[gy[p], gx[p]] (precomputed permutation gather)."""
    return plane[gy, gx]


def gather_field(dx, dy, gy, gx, a, b, c, d):
    """Permutation gather of a field with a per-pixel linear action."""
    gdx = dx[gy, gx]
    gdy = dy[gy, gx]
    return a * gdx + b * gdy, c * gdx + d * gdy


def residual_gap_mean(t, v, ta):
    """Mean absolute gap between pre- and post-alignment squared residuals."""
    o1 = (t - v) ** 2
    o2 = (ta - v) ** 2
    return float(np.mean(np.abs(o2 - o1)))


def smooth_value(dx, dy):
    """Mean squared forward differences, summed over both components."""
    total = 0.0
    for f in (dx, dy):
        gx = f[:, 1:] - f[:, :-1]
        gy = f[1:, :] - f[:-1, :]
        total += float(np.mean(gx * gx)) + float(np.mean(gy * gy))
    return total


def invcons_value(pdx, pdy, ndx, ndy):
    """Mean squared forward/backward field composition residual.

    For each pixel p: || phi_fwd(p) + phi_rev(p + phi_fwd(p)) ||^2, with
    the reverse field sampled bilinearly (clamped).
    """
    rx = warp_bilinear(ndx, pdx, pdy)
    ry = warp_bilinear(ndy, pdx, pdy)
    ex = pdx + rx
    ey = pdy + ry
    return float(np.mean(ex * ex + ey * ey))


def mae_mse(a, b):
    """Mean absolute and mean squared difference of two same-shape arrays."""
    d = a - b
    return float(np.mean(np.abs(d))), float(np.mean(d * d))


def ssim_mean(a, b, kernel, c1, c2):
    """Mean windowed SSIM over valid positions (no padding)."""
    k = np.asarray(kernel)
    kw = len(k)
    h, w = a.shape
    oh, ow = h - kw + 1, w - kw + 1
    if oh < 1 or ow < 1:
        raise ValueError("image smaller than SSIM window")

    def win(img):
        tmp = np.zeros((h, ow))
        for i, kv in enumerate(k):
            tmp += kv * img[:, i : i + ow]
        out = np.zeros((oh, ow))
        for i, kv in enumerate(k):
            out += kv * tmp[i : i + oh, :]
        return out

    mu_a = win(a)
    mu_b = win(b)
    aa = win(a * a)
    bb = win(b * b)
    ab = win(a * b)
    va = aa - mu_a * mu_a
    vb = bb - mu_b * mu_b
    cov = ab - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2)
    return float(np.mean(num / den))


def sobel_adjoint(gx_bar, gy_bar):
    """Adjoint of sobel_xy under replicate padding (scatter form)."""
    h, w = gx_bar.shape
    out = np.zeros((h + 2, w + 2))
    # gx = (tr - tl) + 2(mr - ml) + (br - bl)
    out[0:h, 2 : w + 2] += gx_bar
    out[0:h, 0:w] -= gx_bar
    out[1 : h + 1, 2 : w + 2] += 2.0 * gx_bar
    out[1 : h + 1, 0:w] -= 2.0 * gx_bar
    out[2 : h + 2, 2 : w + 2] += gx_bar
    out[2 : h + 2, 0:w] -= gx_bar
    # gy = (bl - tl) + 2(bc - tc) + (br - tr)
    out[2 : h + 2, 0:w] += gy_bar
    out[0:h, 0:w] -= gy_bar
    out[2 : h + 2, 1 : w + 1] += 2.0 * gy_bar
    out[0:h, 1 : w + 1] -= 2.0 * gy_bar
    out[2 : h + 2, 2 : w + 2] += gy_bar
    out[0:h, 2 : w + 2] -= gy_bar
    # Fold the replicate-padding ring back onto the edge pixels.
    core = out[1 : h + 1, 1 : w + 1].copy()
    core[0, :] += out[0, 1 : w + 1]
    core[-1, :] += out[h + 1, 1 : w + 1]
    core[:, 0] += out[1 : h + 1, 0]
    core[:, -1] += out[1 : h + 1, w + 1]
    core[0, 0] += out[0, 0]
    core[0, -1] += out[0, w + 1]
    core[-1, 0] += out[h + 1, 0]
    core[-1, -1] += out[h + 1, w + 1]
    return core
