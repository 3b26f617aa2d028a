import numpy as np
import pytest

from regfuse.fuse import FuseConfig, decompose, fuse, fuse_max, fuse_optimize
from regfuse.image import Image
from regfuse.losses import fusion_loss

from conftest import textured


class TestDecompose:
    def test_constant(self):
        img = Image(np.full((9, 9), 0.4))
        d = decompose(img, 2.0)
        assert np.allclose(d.smooth.data, 0.4, atol=1e-12)
        assert np.allclose(d.detail.data, 0.0, atol=1e-12)

    def test_reconstructs(self):
        img = textured(1, 20)
        d = decompose(img, 2.0)
        assert np.abs(d.smooth.data + d.detail.data - img.data).max() < 1e-7

    def test_impulse_detail(self):
        arr = np.zeros((15, 15))
        arr[7, 7] = 1.0
        d = decompose(Image(arr), 1.0)
        assert d.detail.data[7, 7] == pytest.approx(1.0 - d.smooth.data[7, 7], abs=1e-12)
        assert d.smooth.data[7, 7] > 0.0

    def test_bad_sigma(self):
        with pytest.raises(ValueError):
            decompose(textured(1, 8), -1.0)


class TestFuseMax:
    def test_idempotent(self):
        a = textured(2, 10)
        assert np.array_equal(fuse_max(a, a).data, a.data)

    def test_commutative_monotone(self, rng):
        a, b = textured(3, 10), textured(4, 10)
        ab = fuse_max(a, b)
        assert np.array_equal(ab.data, fuse_max(b, a).data)
        assert np.all(ab.data >= a.data) and np.all(ab.data >= b.data)

    def test_constants(self):
        z = Image(np.zeros((6, 6)))
        o = Image(np.ones((6, 6)))
        assert np.array_equal(fuse_max(z, o).data, o.data)

    def test_mixed_constants(self):
        a = Image(np.full((5, 5), 0.3))
        b = Image(np.full((5, 5), 0.7))
        assert np.all(fuse_max(a, b).data == 0.7)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            fuse_max(textured(1, 8), textured(1, 10))


class TestFuseOptimize:
    def test_zero_iterations_is_max(self):
        a, b = textured(5, 16), textured(6, 16)
        out = fuse_optimize(a, b, FuseConfig(iterations=0))
        assert np.array_equal(out.data, fuse_max(a, b).data)

    def test_identical_inputs_unchanged(self):
        a = textured(7, 16)
        out = fuse_optimize(a, a, FuseConfig(iterations=10))
        assert np.abs(out.data - a.data).max() < 1e-6

    def test_never_increases_loss(self):
        a, b = textured(8, 20), textured(9, 20)
        cfg = FuseConfig(iterations=15)
        feats = (decompose(a, cfg.sigma), decompose(b, cfg.sigma))
        init = fusion_loss(fuse_max(a, b), a, b, feats, cfg.corr_epsilon, cfg.weights)
        out = fuse_optimize(a, b, cfg)
        final = fusion_loss(out, a, b, feats, cfg.corr_epsilon, cfg.weights)
        assert final <= init + 1e-12

    def test_improves_on_conflicting_pair(self):
        step = np.zeros((20, 20))
        step[:, 10:] = 0.8
        a = Image(step)
        b = textured(10, 20)
        cfg = FuseConfig(iterations=25)
        feats = (decompose(a, cfg.sigma), decompose(b, cfg.sigma))
        init = fusion_loss(fuse_max(a, b), a, b, feats, cfg.corr_epsilon, cfg.weights)
        out = fuse_optimize(a, b, cfg)
        final = fusion_loss(out, a, b, feats, cfg.corr_epsilon, cfg.weights)
        assert final <= init

    def test_range_stays_unit(self):
        a, b = textured(11, 16), textured(12, 16)
        out = fuse_optimize(a, b, FuseConfig(iterations=10, step=0.5))
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0

    def test_trace_collects(self):
        a, b = textured(13, 16), textured(14, 16)
        trace = []
        fuse_optimize(a, b, FuseConfig(iterations=5), trace=trace)
        assert trace and trace[0]["iter"] == 0
        vals = [r["value"] for r in trace]
        assert all(y <= x + 1e-12 for x, y in zip(vals, vals[1:]))


def test_fuse_dispatch():
    a, b = textured(15, 16), textured(16, 16)
    assert np.array_equal(fuse(a, b, FuseConfig(mode="max")).data, fuse_max(a, b).data)
    with pytest.raises(ValueError):
        FuseConfig(mode="avg")
