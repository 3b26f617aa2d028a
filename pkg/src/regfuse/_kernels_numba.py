"""Numba-JIT implementations of the hot numeric kernels.

Loop-level mirror of ``_kernels_numpy``; elementwise outputs are bitwise
identical, reductions agree to summation-order noise. Compiled lazily on
first call and cached on disk.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def warp_bilinear(img, dx, dy):
    h, w = img.shape
    out = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            dxv = dx[y, x]
            dyv = dy[y, x]
            fdx = math.floor(dxv)
            fx = dxv - fdx
            x0 = x + int(fdx)
            fdy = math.floor(dyv)
            fy = dyv - fdy
            y0 = y + int(fdy)

            if x0 < 0 or x0 >= w - 1:
                fx = 0.0
            if x0 < 0:
                x0 = 0
            elif x0 > w - 1:
                x0 = w - 1
            x1 = x0 + 1
            if x1 > w - 1:
                x1 = w - 1

            if y0 < 0 or y0 >= h - 1:
                fy = 0.0
            if y0 < 0:
                y0 = 0
            elif y0 > h - 1:
                y0 = h - 1
            y1 = y0 + 1
            if y1 > h - 1:
                y1 = h - 1

            v00 = img[y0, x0]
            v01 = img[y0, x1]
            v10 = img[y1, x0]
            v11 = img[y1, x1]
            top = v00 + fx * (v01 - v00)
            bot = v10 + fx * (v11 - v10)
            out[y, x] = top + fy * (bot - top)
    return out


@njit(cache=True, nogil=True)
def sobel_xy(img):
    h, w = img.shape
    gx = np.empty((h, w))
    gy = np.empty((h, w))
    for y in range(h):
        ym = y - 1 if y > 0 else 0
        yp = y + 1 if y < h - 1 else h - 1
        for x in range(w):
            xm = x - 1 if x > 0 else 0
            xp = x + 1 if x < w - 1 else w - 1
            tl = img[ym, xm]
            tc = img[ym, x]
            tr = img[ym, xp]
            ml = img[y, xm]
            mr = img[y, xp]
            bl = img[yp, xm]
            bc = img[yp, x]
            br = img[yp, xp]
            gx[y, x] = (tr - tl) + 2.0 * (mr - ml) + (br - bl)
            gy[y, x] = (bl - tl) + 2.0 * (bc - tc) + (br - tr)
    return gx, gy


@njit(cache=True, nogil=True)
def convolve_h(img, kernel):
    h, w = img.shape
    n = kernel.shape[0]
    r = (n - 1) // 2
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i in range(n):
                xx = x + i - r
                if xx < 0:
                    xx = 0
                elif xx > w - 1:
                    xx = w - 1
                acc += kernel[i] * img[y, xx]
            out[y, x] = acc
    return out


@njit(cache=True, nogil=True)
def convolve_v(img, kernel):
    h, w = img.shape
    n = kernel.shape[0]
    r = (n - 1) // 2
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i in range(n):
                yy = y + i - r
                if yy < 0:
                    yy = 0
                elif yy > h - 1:
                    yy = h - 1
                acc += kernel[i] * img[yy, x]
            out[y, x] = acc
    return out


@njit(cache=True, nogil=True)
def gaussian_blur_sep(img, kernel):
    return convolve_v(convolve_h(img, kernel), kernel)


@njit(cache=True, nogil=True)
def resize_bilinear(img, oh, ow):
    h, w = img.shape
    sy = h / oh
    sx = w / ow
    out = np.empty((oh, ow))
    for yo in range(oh):
        ys = (yo + 0.5) * sy - 0.5
        if ys < 0.0:
            ys = 0.0
        elif ys > h - 1.0:
            ys = h - 1.0
        y0 = int(math.floor(ys))
        if y0 > h - 1:
            y0 = h - 1
        y1 = y0 + 1
        if y1 > h - 1:
            y1 = h - 1
        fy = ys - y0
        for xo in range(ow):
            xs = (xo + 0.5) * sx - 0.5
            if xs < 0.0:
                xs = 0.0
            elif xs > w - 1.0:
                xs = w - 1.0
            x0 = int(math.floor(xs))
            if x0 > w - 1:
                x0 = w - 1
            x1 = x0 + 1
            if x1 > w - 1:
                x1 = w - 1
            fx = xs - x0
            ia = img[y0, x0]
            ib = img[y0, x1]
            ic = img[y1, x0]
            id_ = img[y1, x1]
            top = ia + fx * (ib - ia)
            bot = ic + fx * (id_ - ic)
            out[yo, xo] = top + fy * (bot - top)
    return out


@njit(cache=True, nogil=True)
def box_down2(img):
    h, w = img.shape
    oh = h // 2
    ow = w // 2
    out = np.empty((oh, ow))
    for y in range(oh):
        for x in range(ow):
            out[y, x] = 0.25 * (
                img[2 * y, 2 * x]
                + img[2 * y, 2 * x + 1]
                + img[2 * y + 1, 2 * x]
                + img[2 * y + 1, 2 * x + 1]
            )
    return out


@njit(cache=True, nogil=True)
def densify_bilinear(params, h, w):
    gh, gw = params.shape[0], params.shape[1]
    dx = np.empty((h, w))
    dy = np.empty((h, w))
    stepx = (gw - 1) / (w - 1) if w > 1 else 0.0
    stepy = (gh - 1) / (h - 1) if h > 1 else 0.0
    for y in range(h):
        ys = y * stepy
        y0 = int(math.floor(ys))
        if y0 > gh - 2:
            y0 = gh - 2
        fy = ys - y0
        for x in range(w):
            xs = x * stepx
            x0 = int(math.floor(xs))
            if x0 > gw - 2:
                x0 = gw - 2
            fx = xs - x0
            for c in range(2):
                pa = params[y0, x0, c]
                pb = params[y0, x0 + 1, c]
                pc = params[y0 + 1, x0, c]
                pd = params[y0 + 1, x0 + 1, c]
                top = pa + fx * (pb - pa)
                bot = pc + fx * (pd - pc)
                v = top + fy * (bot - top)
                if c == 0:
                    dx[y, x] = v
                else:
                    dy[y, x] = v
    return dx, dy


@njit(cache=True, nogil=True)
def edge_mask(gx, gy, threshold):
    h, w = gx.shape
    out = np.empty((h, w), dtype=np.uint8)
    t2 = threshold * threshold
    for y in range(h):
        for x in range(w):
            g = gx[y, x] * gx[y, x] + gy[y, x] * gy[y, x]
            out[y, x] = 1 if g > t2 else 0
    return out


@njit(cache=True, nogil=True)
def _fold_angle(diff):
    d = abs(diff)
    if d > np.pi:
        d = 2.0 * np.pi - d
    if d > 0.5 * np.pi:
        d = np.pi - d
    return d


@njit(cache=True, nogil=True)
def match_edges(ays, axs, aangs, tmask, tgx, tgy, offsets):
    h, w = tmask.shape
    m = ays.shape[0]
    nk = offsets.shape[0]
    found = np.zeros(m, dtype=np.uint8)
    dist = np.zeros(m)
    angdiff = np.zeros(m)
    for i in range(m):
        ay = ays[i]
        ax = axs[i]
        for k in range(nk):
            yy = ay + offsets[k, 0]
            if yy < 0 or yy >= h:
                continue
            xx = ax + offsets[k, 1]
            if xx < 0 or xx >= w:
                continue
            if tmask[yy, xx] == 0:
                continue
            found[i] = 1
            dy = offsets[k, 0]
            dx = offsets[k, 1]
            dist[i] = math.sqrt(float(dy * dy + dx * dx))
            tang = math.atan2(tgy[yy, xx], tgx[yy, xx])
            angdiff[i] = _fold_angle(aangs[i] - tang)
            break
    return found, dist, angdiff


@njit(cache=True, nogil=True)
def gather_plane(plane, gy, gx):
    h, w = gy.shape
    out = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            out[y, x] = plane[gy[y, x], gx[y, x]]
    return out


@njit(cache=True, nogil=True)
def gather_field(dx, dy, gy, gx, a, b, c, d):
    h, w = gy.shape
    odx = np.empty((h, w))
    ody = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            gdx = dx[gy[y, x], gx[y, x]]
            gdy = dy[gy[y, x], gx[y, x]]
            odx[y, x] = a[y, x] * gdx + b[y, x] * gdy
            ody[y, x] = c[y, x] * gdx + d[y, x] * gdy
    return odx, ody


@njit(cache=True, nogil=True)
def residual_gap_mean(t, v, ta):
    h, w = t.shape
    acc = 0.0
    for y in range(h):
        for x in range(w):
            d1 = t[y, x] - v[y, x]
            d2 = ta[y, x] - v[y, x]
            acc += abs(d2 * d2 - d1 * d1)
    return acc / (h * w)


@njit(cache=True, nogil=True)
def smooth_value(dx, dy):
    h, w = dx.shape
    total = 0.0
    for c in range(2):
        f = dx if c == 0 else dy
        accx = 0.0
        for y in range(h):
            for x in range(w - 1):
                g = f[y, x + 1] - f[y, x]
                accx += g * g
        accy = 0.0
        for y in range(h - 1):
            for x in range(w):
                g = f[y + 1, x] - f[y, x]
                accy += g * g
        total += accx / (h * (w - 1)) + accy / ((h - 1) * w)
    return total


@njit(cache=True, nogil=True)
def invcons_value(pdx, pdy, ndx, ndy):
    rx = warp_bilinear(ndx, pdx, pdy)
    ry = warp_bilinear(ndy, pdx, pdy)
    h, w = pdx.shape
    acc = 0.0
    for y in range(h):
        for x in range(w):
            ex = pdx[y, x] + rx[y, x]
            ey = pdy[y, x] + ry[y, x]
            acc += ex * ex + ey * ey
    return acc / (h * w)


@njit(cache=True, nogil=True)
def mae_mse(a, b):
    h, w = a.shape
    s1 = 0.0
    s2 = 0.0
    for y in range(h):
        for x in range(w):
            d = a[y, x] - b[y, x]
            s1 += abs(d)
            s2 += d * d
    n = h * w
    return s1 / n, s2 / n


@njit(cache=True, nogil=True)
def ssim_mean(a, b, kernel, c1, c2):
    h, w = a.shape
    kw = kernel.shape[0]
    oh = h - kw + 1
    ow = w - kw + 1
    # horizontal pass for the five windowed moments
    ha = np.zeros((h, ow))
    hb = np.zeros((h, ow))
    haa = np.zeros((h, ow))
    hbb = np.zeros((h, ow))
    hab = np.zeros((h, ow))
    for y in range(h):
        for x in range(ow):
            sa = 0.0
            sb = 0.0
            saa = 0.0
            sbb = 0.0
            sab = 0.0
            for i in range(kw):
                kv = kernel[i]
                va = a[y, x + i]
                vb = b[y, x + i]
                sa += kv * va
                sb += kv * vb
                saa += kv * va * va
                sbb += kv * vb * vb
                sab += kv * va * vb
            ha[y, x] = sa
            hb[y, x] = sb
            haa[y, x] = saa
            hbb[y, x] = sbb
            hab[y, x] = sab
    acc = 0.0
    for y in range(oh):
        for x in range(ow):
            mu_a = 0.0
            mu_b = 0.0
            maa = 0.0
            mbb = 0.0
            mab = 0.0
            for i in range(kw):
                kv = kernel[i]
                mu_a += kv * ha[y + i, x]
                mu_b += kv * hb[y + i, x]
                maa += kv * haa[y + i, x]
                mbb += kv * hbb[y + i, x]
                mab += kv * hab[y + i, x]
            va = maa - mu_a * mu_a
            vb = mbb - mu_b * mu_b
            cov = mab - mu_a * mu_b
            num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
            den = (mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2)
            acc += num / den
    return acc / (oh * ow)


@njit(cache=True, nogil=True)
def sobel_adjoint(gx_bar, gy_bar):
    h, w = gx_bar.shape
    out = np.zeros((h, w))
    for y in range(h):
        ym = y - 1 if y > 0 else 0
        yp = y + 1 if y < h - 1 else h - 1
        for x in range(w):
            xm = x - 1 if x > 0 else 0
            xp = x + 1 if x < w - 1 else w - 1
            gxv = gx_bar[y, x]
            gyv = gy_bar[y, x]
            out[ym, xm] += -gxv - gyv
            out[ym, x] += -2.0 * gyv
            out[ym, xp] += gxv - gyv
            out[y, xm] += -2.0 * gxv
            out[y, xp] += 2.0 * gxv
            out[yp, xm] += -gxv + gyv
            out[yp, x] += 2.0 * gyv
            out[yp, xp] += gxv + gyv
    return out
