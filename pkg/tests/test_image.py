import numpy as np
import pytest

from regfuse.image import (
    DisplacementField,
    Image,
    gaussian_blur,
    gaussian_kernel,
    resample_scale,
    sobel,
    warp,
)

from conftest import textured
from oracles import blur_ref, resize_ref, sobel_ref, warp_ref


class TestImageTypes:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Image(np.array([[0.0, np.nan]]))

    def test_rejects_wrong_rank(self):
        with pytest.raises(ValueError):
            Image(np.zeros(4))

    def test_field_shape_mismatch(self):
        with pytest.raises(ValueError):
            DisplacementField(np.zeros((2, 3)), np.zeros((3, 2)))

    def test_data_is_read_only(self):
        img = Image(np.zeros((3, 3)))
        with pytest.raises(ValueError):
            img.data[0, 0] = 1.0

    def test_unit_range_check(self):
        with pytest.raises(ValueError):
            Image(np.full((2, 2), 1.5)).assert_unit_range()


class TestWarp:
    def test_zero_field_identity_bitwise(self, rng):
        for _ in range(20):
            img = Image(rng.random((rng.integers(1, 12), rng.integers(1, 12))))
            out = warp(img, DisplacementField.zero(img.width, img.height))
            assert np.array_equal(out.data, img.data)

    def test_row_clamp(self):
        img = Image(np.array([[0.0, 1.0]]))
        fld = DisplacementField(np.full((1, 2), 1.0), np.zeros((1, 2)))
        assert np.array_equal(warp(img, fld).data, np.array([[1.0, 1.0]]))

    def test_half_pixel_shift(self):
        img = Image(np.array([[0.0, 1.0], [2.0, 3.0]]) / 3.0)
        fld = DisplacementField(np.full((2, 2), 0.5), np.zeros((2, 2)))
        out = warp(img, fld)
        assert out.data[0, 0] == pytest.approx(0.5 / 3.0, abs=1e-12)
        assert out.data[0, 1] == pytest.approx(1.0 / 3.0, abs=1e-12)
        assert out.data[1, 0] == pytest.approx(2.5 / 3.0, abs=1e-12)
        assert out.data[1, 1] == pytest.approx(1.0, abs=1e-12)

    def test_integer_field_is_exact_shift(self, rng):
        img = textured(3, 16)
        fld = DisplacementField(np.full((16, 16), 2.0), np.full((16, 16), -1.0))
        out = warp(img, fld)
        ys = np.clip(np.arange(16) - 1, 0, 15)
        xs = np.clip(np.arange(16) + 2, 0, 15)
        assert np.array_equal(out.data, img.data[np.ix_(ys, xs)])

    def test_against_reference(self, rng):
        img = textured(7, 14)
        dx = rng.normal(0, 2, (14, 14))
        dy = rng.normal(0, 2, (14, 14))
        out = warp(img, DisplacementField(dx, dy))
        assert np.allclose(out.data, warp_ref(img.data, dx, dy), atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            warp(Image(np.zeros((4, 4))), DisplacementField.zero(3, 3))


class TestSobel:
    def test_constant_has_zero_magnitude(self):
        em = sobel(Image(np.full((6, 6), 0.3)))
        assert np.all(em.magnitude == 0.0)

    def test_vertical_step(self):
        step = np.zeros((8, 8))
        step[:, 4:] = 1.0
        em = sobel(Image(step))
        assert np.allclose(em.magnitude[:, 3], 4.0)
        assert np.allclose(em.magnitude[:, 4], 4.0)
        assert np.allclose(em.angle[:, 3], 0.0)
        mag_t = sobel(Image(step.T.copy())).magnitude
        assert np.allclose(mag_t, em.magnitude.T)
        assert np.allclose(sobel(Image(step.T.copy())).angle[3, :], np.pi / 2)

    def test_negation_flips_angle(self):
        img = textured(5, 12)
        em = sobel(img)
        em_neg = sobel(Image(1.0 - img.data))
        assert np.allclose(em.magnitude, em_neg.magnitude, atol=1e-12)
        interior = em.magnitude > 1e-9
        d = np.abs(em.angle - em_neg.angle)[interior]
        assert np.allclose(np.minimum(d, 2 * np.pi - d), np.pi, atol=1e-9)

    def test_against_reference(self):
        img = textured(11, 10)
        em = sobel(img)
        gx, gy = sobel_ref(img.data)
        assert np.allclose(em.magnitude, np.hypot(gx, gy), atol=1e-12)

    def test_too_small(self):
        with pytest.raises(ValueError):
            sobel(Image(np.zeros((2, 5))))


class TestGaussianBlur:
    def test_constant_preserved(self):
        out = gaussian_blur(Image(np.full((7, 9), 0.42)), 1.7)
        assert np.allclose(out.data, 0.42, atol=1e-12)

    def test_impulse_center_weight(self):
        img = np.zeros((15, 15))
        img[7, 7] = 1.0
        out = gaussian_blur(Image(img), 1.0)
        k = gaussian_kernel(1.0)
        center = k[len(k) // 2] ** 2
        assert out.data[7, 7] == pytest.approx(center, abs=1e-12)

    def test_tiny_sigma_is_near_identity(self):
        img = textured(2, 12)
        out = gaussian_blur(img, 0.1)
        assert np.abs(out.data - img.data).max() < 1e-3

    def test_against_reference(self):
        img = textured(9, 9)
        out = gaussian_blur(img, 1.3)
        assert np.allclose(out.data, blur_ref(img.data, 1.3), atol=1e-12)

    def test_bad_sigma(self):
        with pytest.raises(ValueError):
            gaussian_blur(Image(np.zeros((3, 3))), 0.0)


class TestResample:
    def test_scale_one_identity(self):
        img = textured(1, 9)
        assert np.array_equal(resample_scale(img, 1.0).data, img.data)

    def test_constant_doubles(self):
        out = resample_scale(Image(np.full((5, 7), 0.6)), 2.0)
        assert out.data.shape == (10, 14)
        assert np.allclose(out.data, 0.6, atol=1e-12)

    def test_two_by_two_against_reference(self):
        img = Image(np.array([[0.0, 1.0], [2.0, 3.0]]) / 3.0)
        out = resample_scale(img, 2.0)
        assert np.allclose(out.data, resize_ref(img.data, 4, 4), atol=1e-12)
        # hand values for the first row: positions clamp at the borders
        assert np.allclose(out.data[0] * 3.0, [0.0, 0.25, 0.75, 1.0], atol=1e-12)

    def test_round_trip_error_small(self):
        yy, xx = np.mgrid[0:20, 0:20] / 20.0
        img = Image(0.5 + 0.3 * np.sin(2 * np.pi * xx) * np.cos(2 * np.pi * yy))
        back = resample_scale(resample_scale(img, 2.0), 0.5)
        assert np.abs(back.data - img.data).mean() < 0.02

    def test_degenerate_target(self):
        with pytest.raises(ValueError):
            resample_scale(Image(np.zeros((4, 4))), 0.01)


def test_blur_mean_preserved_for_constant():
    img = Image(np.full((12, 12), 0.5))
    out = gaussian_blur(img, 2.0)
    assert abs(out.data.mean() - 0.5) < 1e-6
