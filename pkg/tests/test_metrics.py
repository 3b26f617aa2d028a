import numpy as np
import pytest

from regfuse.image import Image
from regfuse.metrics import MetricReport, ag, ei, evaluate_pair, mg, qabf, sf, viff

from conftest import textured
import oracles


class TestSharpnessStats:
    def test_constant_all_zero(self):
        c = Image(np.full((10, 10), 0.5))
        assert ag(c) == 0.0 and mg(c) == 0.0 and ei(c) == 0.0 and sf(c) == 0.0

    def test_checkerboard_sf(self):
        cb = Image((np.indices((12, 12)).sum(0) % 2).astype(float))
        assert sf(cb) == pytest.approx(255.0 * np.sqrt(2.0), abs=1e-9)

    def test_step_hand_values(self):
        step = np.zeros((6, 8))
        step[:, 4:] = 1.0
        img = Image(step)
        assert ag(img) == pytest.approx(oracles.ag_ref(step), abs=1e-9)
        assert mg(img) == pytest.approx(oracles.mg_ref(step), abs=1e-9)
        # forward differences fire on exactly one column
        assert mg(img) == pytest.approx(255.0 / 2.0 / 7.0, abs=1e-9)

    def test_intensity_scaling_linear(self):
        img = textured(1, 12)
        half = Image(0.5 * img.data)
        for fn in (ag, mg, ei, sf):
            assert fn(half) == pytest.approx(0.5 * fn(img), rel=1e-9)

    def test_too_small(self):
        with pytest.raises(ValueError):
            ag(Image(np.zeros((2, 2))))


class TestQabf:
    def test_identity_high(self):
        a = textured(2, 32)
        assert qabf(a, a, a) >= 0.98

    def test_constant_zero(self):
        c = Image(np.full((8, 8), 0.3))
        assert qabf(c, c, c) == 0.0

    def test_in_unit_interval(self):
        for s in range(5):
            a, b, f = textured(s, 12), textured(s + 10, 12), textured(s + 20, 12)
            v = qabf(a, b, f)
            assert 0.0 <= v <= 1.0

    def test_matches_reference(self, rng):
        for s in range(5):
            a = Image(rng.random((16, 16)))
            b = Image(rng.random((16, 16)))
            f = Image(rng.random((16, 16)))
            assert qabf(a, b, f) == pytest.approx(oracles.qabf_ref(a.data, b.data, f.data), abs=1e-9)


class TestViff:
    def test_identity_one(self):
        a = textured(3, 36)
        assert viff(a, a, a) == pytest.approx(1.0, abs=1e-6)

    def test_constant_fused_low(self):
        a, b = textured(4, 32), textured(5, 32)
        f = Image(np.full((32, 32), 0.5))
        assert viff(a, b, f) < 0.1

    def test_zero_information_reference(self):
        c = Image(np.full((32, 32), 0.5))
        assert viff(c, c, c) == 0.0

    def test_matches_reference(self, rng):
        for s in range(3):
            a = Image(rng.random((16, 16)))
            b = Image(rng.random((16, 16)))
            f = Image(rng.random((16, 16)))
            assert viff(a, b, f) == pytest.approx(
                oracles.viff_ref(a.data, b.data, f.data), abs=1e-9
            )

    def test_too_small(self):
        with pytest.raises(ValueError):
            viff(textured(1, 12), textured(2, 12), textured(3, 12))


class TestTranslationInvariance:
    def test_all_metrics_within_two_percent(self):
        from regfuse.image import gaussian_blur

        base = textured(10, 64)
        a0 = Image(np.clip(0.85 * base.data + 0.05, 0, 1))
        b0 = Image(
            np.clip(gaussian_blur(base, 1.5).data + 0.3 * (textured(11, 64).data - 0.5), 0, 1)
        )
        f0 = Image(np.maximum(a0.data, b0.data))

        def crops(img, shifted):
            src = np.roll(img.data, (1, 1), axis=(0, 1)) if shifted else img.data
            return Image(src[8:56, 8:56].copy())

        a1, b1, f1 = (crops(x, False) for x in (a0, b0, f0))
        a2, b2, f2 = (crops(x, True) for x in (a0, b0, f0))
        for fn in (sf, ag, mg, ei):
            v1, v2 = fn(f1), fn(f2)
            assert abs(v2 - v1) / v1 < 0.02, fn.__name__
        q1, q2 = qabf(a1, b1, f1), qabf(a2, b2, f2)
        assert abs(q2 - q1) / q1 < 0.02
        w1, w2 = viff(a1, b1, f1), viff(a2, b2, f2)
        assert abs(w2 - w1) / w1 < 0.02


class TestEvaluatePair:
    def test_identity_case(self):
        v = textured(12, 36)
        rep = evaluate_pair(v, v, v, "p", "m", "shift", 5)
        assert rep.qabf >= 0.98
        assert rep.viff == pytest.approx(1.0, abs=1e-6)
        assert rep.sf == pytest.approx(sf(v), abs=1e-12)

    def test_degenerate_all_zero(self):
        c = Image(np.full((32, 32), 0.5))
        rep = evaluate_pair(c, c, c)
        assert (rep.qabf, rep.viff, rep.sf, rep.ag, rep.mg, rep.ei) == (0,) * 6

    def test_report_round_trip(self):
        rep = MetricReport("p0", "registered", "dilate", 10, 0.5, 0.6, 1.2, 3.4, 5.6, 7.8)
        assert MetricReport.from_json(rep.to_json()) == rep

    def test_csv_row_order(self):
        rep = MetricReport("p0", "registered", "dilate", 10, 0.5, 0.6, 1.2, 3.4, 5.6, 7.8)
        row = rep.csv_row()
        assert row.startswith("dilate,10,registered,0.5")
        fields = row.split(",")
        assert [round(float(x), 4) for x in fields[3:]] == [0.5, 0.6, 1.2, 3.4, 5.6, 7.8]
