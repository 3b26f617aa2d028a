"""Built-in analytic correctness checks, exposed as `regfuse selftest`.

Each check exercises one operation against a hand-computable case. Exit
status 0 means every check passed.
"""

from __future__ import annotations

import numpy as np

from . import fileio, scramble
from .fuse import decompose, fuse_max
from .image import DisplacementField, Image, gaussian_blur, resample_scale, sobel, warp
from .losses import correlation, feature_correlation_loss, residual_preservation_loss, smoothness_loss
from .metrics import qabf, sf, viff
from .register import ControlGrid, densify


def _checks():
    rng = np.random.default_rng(20240501)

    img = Image(rng.random((12, 12)))
    yield "warp zero field is identity", np.array_equal(
        warp(img, DisplacementField.zero(12, 12)).data, img.data
    )

    row = Image(np.array([[0.0, 1.0]]))
    shifted = warp(row, DisplacementField(np.full((1, 2), 1.0), np.zeros((1, 2))))
    yield "warp clamps at the border", np.array_equal(shifted.data, np.array([[1.0, 1.0]]))

    step = np.zeros((8, 8))
    step[:, 4:] = 1.0
    em = sobel(Image(step))
    yield "sobel step magnitude is 4", (
        abs(em.magnitude[4, 3] - 4.0) < 1e-12 and abs(em.angle[4, 3]) < 1e-12
    )

    const = Image(np.full((9, 9), 0.37))
    yield "blur preserves constants", float(
        np.abs(gaussian_blur(const, 2.0).data - 0.37).max()
    ) < 1e-12

    yield "resample scale 1 is identity", np.array_equal(
        resample_scale(img, 1.0).data, img.data
    )

    ok = True
    for _ in range(50):
        n = int(rng.choice([-1, 0, 1, 2]))
        s = 2 * int(rng.integers(4, 16))
        t = scramble.sample_transcript(s, s, n, int(rng.integers(0, 1 << 30)))
        x = Image(rng.random((s, s)))
        ok &= np.array_equal(
            scramble.unscramble_image(scramble.scramble_image(x, t), t).data, x.data
        )
    yield "scramble round trip is exact", ok

    t = Image(np.zeros((6, 6)))
    ta = Image(np.full((6, 6), 0.5))
    yield "residual preservation on constants", (
        abs(residual_preservation_loss(t, t, ta) - 0.25) < 1e-12
    )

    fld = DisplacementField(np.tile(np.arange(5.0), (5, 1)), np.zeros((5, 5)))
    yield "smoothness of unit slope", abs(smoothness_loss(fld) - 1.0) < 1e-12

    a = Image(rng.random((16, 16)))
    yield "correlation with self", abs(correlation(a, a) - 1.0) < 1e-12
    val = feature_correlation_loss(a, a, a, a, 1.01)
    yield "feature correlation on identical inputs", abs(val - 1.0 / 2.01) < 1e-12

    grid = ControlGrid(np.full((2, 2, 2), 3.0), 10, 10)
    dense = densify(grid)
    yield "densify constant grid", (
        np.array_equal(dense.dx, np.full((10, 10), 3.0))
        and np.array_equal(dense.dy, np.full((10, 10), 3.0))
    )

    cb = Image(np.indices((12, 12)).sum(0) % 2)
    yield "spatial frequency of checkerboard", abs(sf(cb) - 255.0 * np.sqrt(2.0)) < 1e-9

    tex = Image(rng.random((40, 40)))
    yield "edge preservation of identical images", qabf(tex, tex, tex) >= 0.98
    yield "information fidelity of identical images", abs(viff(tex, tex, tex) - 1.0) < 1e-6

    dec = decompose(tex, 2.0)
    yield "decomposition reconstructs", float(
        np.abs(dec.smooth.data + dec.detail.data - tex.data).max()
    ) < 1e-7
    yield "max fusion is idempotent", np.array_equal(fuse_max(tex, tex).data, tex.data)

    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as td:
        p = Path(td) / "x.pgm"
        fileio.save_image(tex, p)
        again = fileio.load_image(p)
        fileio.save_image(again, Path(td) / "y.pgm")
        yield "pgm round trip is byte identical", (
            p.read_bytes() == (Path(td) / "y.pgm").read_bytes()
        )
        f = DisplacementField(
            rng.normal(0, 2, (9, 9)).astype(np.float32).astype(np.float64),
            rng.normal(0, 2, (9, 9)).astype(np.float32).astype(np.float64),
        )
        fp = Path(td) / "f.bsrf"
        fileio.save_field(f, fp)
        f2 = fileio.load_field(fp)
        yield "field file round trip is exact", (
            np.array_equal(f.dx, f2.dx) and np.array_equal(f.dy, f2.dy)
        )


def run_selftest() -> int:
    failures = 0
    for name, ok in _checks():
        print(f"{'ok' if ok else 'FAIL'}  {name}")
        if not ok:
            failures += 1
    if failures:
        print(f"{failures} check(s) failed")
        return 1
    print("all checks passed")
    return 0
