import math

import numpy as np
import pytest

from changeforge import imageops
from changeforge.imageops import (
    BoundsError,
    EmptyChangeError,
    ParameterError,
    Patch,
    Rect,
    add_gaussian_noise,
    color_jitter,
    composite,
    crop_rect,
    feather_mask,
    rotate_patch,
)


def _img(seed, size=64):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)


class TestCropRect:
    def test_full_image_identity(self):
        img = _img(0)
        p = crop_rect(img, Rect(0, 0, 64, 64))
        assert np.array_equal(p.image, img)
        assert np.all(p.mask == 1.0)

    def test_single_pixel(self):
        img = _img(1)
        p = crop_rect(img, Rect(10, 10, 1, 1))
        assert p.image.shape == (1, 1, 3)
        assert np.array_equal(p.image[0, 0], img[10, 10])

    def test_matches_manual_pixel_copy(self):
        img = _img(2, size=128)
        p = crop_rect(img, Rect(5, 5, 64, 32))
        # independent pixel-copy oracle
        oracle = np.empty((32, 64, 3), dtype=np.uint8)
        for y in range(32):
            for x in range(64):
                oracle[y, x] = img[5 + y, 5 + x]
        assert np.array_equal(p.image, oracle)

    def test_out_of_bounds_rejected(self):
        with pytest.raises(BoundsError):
            crop_rect(_img(3), Rect(60, 0, 10, 10))


class TestRotatePatch:
    def test_zero_angle_identity(self):
        p = crop_rect(_img(4), Rect(3, 7, 20, 12))
        q = rotate_patch(p, 0)
        assert np.array_equal(q.image, p.image)
        assert np.array_equal(q.mask, p.mask)

    def test_exact_90_permutation(self):
        p = crop_rect(_img(5), Rect(0, 0, 20, 12))
        q = rotate_patch(p, 90)
        assert q.image.shape == (20, 12, 3)
        h, w = p.image.shape[:2]
        for i in range(h):
            for j in range(w):
                # counterclockwise: column j becomes row (w-1-j)
                assert np.array_equal(q.image[w - 1 - j, i], p.image[i, j])

    @pytest.mark.parametrize("k", [90, 180, 270])
    def test_quarter_turns_lossless(self, k):
        p = crop_rect(_img(6), Rect(0, 0, 17, 31))
        q = rotate_patch(rotate_patch(p, k), 360 - k)
        assert np.array_equal(q.image, p.image)

    def test_support_area_preserved_at_37_degrees(self):
        p = crop_rect(_img(7, size=128), Rect(10, 10, 60, 40))
        q = rotate_patch(p, 37)
        # dense supersampled rasterization oracle for the rotated rect area
        theta = math.radians(37)
        n = 400
        ys, xs = np.mgrid[0:n, 0:n]
        # sample the output bbox; count points whose inverse-rotation lands
        # inside the source rect
        oh, ow = q.mask.shape
        px = (xs + 0.5) * ow / n - ow / 2.0
        py = (ys + 0.5) * oh / n - oh / 2.0
        sx = math.cos(theta) * px + math.sin(theta) * py
        sy = -math.sin(theta) * px + math.cos(theta) * py
        inside = (np.abs(sx) <= 30) & (np.abs(sy) <= 20)
        oracle_area = inside.mean() * ow * oh
        assert oracle_area == pytest.approx(60 * 40, rel=0.01)
        assert q.mask.sum() == pytest.approx(60 * 40, rel=0.02)

    def test_mask_zero_outside_support(self):
        p = crop_rect(_img(8), Rect(0, 0, 30, 30))
        q = rotate_patch(p, 45)
        # corners of the rotated bbox lie outside the rotated square
        assert q.mask[0, 0] == 0.0
        assert q.mask[0, -1] == 0.0
        assert q.mask[-1, 0] == 0.0
        assert q.mask[-1, -1] == 0.0


class TestFeatherMask:
    def test_sigma_zero_identity(self):
        m = np.zeros((16, 16))
        m[4:12, 4:12] = 1.0
        assert np.array_equal(feather_mask(m, 0.0), m)

    def test_constant_mask_interior_unchanged(self):
        m = np.ones((32, 32))
        out = feather_mask(m, 2.0)
        assert np.allclose(out, 1.0, atol=1e-12)

    def test_step_edge_matches_discrete_convolution_oracle(self):
        m = np.zeros((21, 40))
        m[:, 20:] = 1.0
        sigma = 1.0
        out = feather_mask(m, sigma)
        # direct discrete-convolution oracle (1-D, clamp-to-edge)
        r = math.ceil(3 * sigma)
        taps = np.exp(-np.arange(-r, r + 1) ** 2 / (2 * sigma**2))
        taps /= taps.sum()
        row = m[10]
        oracle = np.empty_like(row)
        for x in range(40):
            acc = 0.0
            for i, t in enumerate(taps):
                xx = min(max(x + i - r, 0), 39)
                acc += t * row[xx]
            oracle[x] = acc
        assert np.allclose(out[10], oracle, atol=1e-12)
        # the step midpoint (between the last 0 and first 1 pixel) sits at
        # the Gaussian CDF value at 0, i.e. 0.5
        midpoint = (out[10, 19] + out[10, 20]) / 2.0
        assert midpoint == pytest.approx(0.5, abs=0.02)

    def test_mass_preserved_away_from_borders(self):
        m = np.zeros((64, 64))
        m[24:40, 24:40] = 1.0
        out = feather_mask(m, 2.0)
        assert out.sum() == pytest.approx(m.sum(), rel=0.01)

    def test_negative_sigma_rejected(self):
        with pytest.raises(ParameterError):
            feather_mask(np.ones((4, 4)), -1.0)


class TestComposite:
    def test_opaque_paste(self):
        bg = _img(9)
        p = crop_rect(_img(10), Rect(0, 0, 10, 8))
        out, rect = composite(bg, p, (5, 6))
        assert rect == Rect(5, 6, 10, 8)
        assert np.array_equal(out[6:14, 5:15], p.image)

    def test_all_transparent_is_empty_change(self):
        bg = _img(11)
        p = Patch(image=_img(12)[:8, :8], mask=np.zeros((8, 8)))
        with pytest.raises(EmptyChangeError):
            composite(bg, p, (0, 0))

    def test_pixels_outside_support_untouched(self):
        bg = _img(13, size=128)
        p = crop_rect(_img(14, size=64), Rect(0, 0, 30, 30))
        p = Patch(p.image, feather_mask(p.mask, 1.0))
        out, rect = composite(bg, p, (40, 40))
        touched = np.zeros(bg.shape[:2], dtype=bool)
        sup = imageops.mask_support_bbox(p.mask)
        sub = p.mask[sup.y : sup.y + sup.h, sup.x : sup.x + sup.w] > 0
        touched[rect.y : rect.y + rect.h, rect.x : rect.x + rect.w] = sub
        assert np.array_equal(out[~touched], bg[~touched])

    def test_support_must_fit(self):
        bg = _img(15)
        p = crop_rect(_img(16), Rect(0, 0, 10, 10))
        with pytest.raises(BoundsError):
            composite(bg, p, (60, 0))


class TestNoise:
    def test_sigma_zero_identity(self, rng):
        img = _img(17)
        assert np.array_equal(add_gaussian_noise(img, 0.0, rng), img)

    def test_noise_statistics(self):
        img = np.full((512, 512, 3), 128, dtype=np.uint8)
        out = add_gaussian_noise(img, 5.0, np.random.default_rng(3))
        assert out.mean() == pytest.approx(128.0, abs=0.5)
        assert out.astype(np.float64).std() == pytest.approx(5.0, abs=0.5)

    def test_same_seed_byte_identical(self):
        img = _img(18)
        a = add_gaussian_noise(img, 7.0, np.random.default_rng(55))
        b = add_gaussian_noise(img, 7.0, np.random.default_rng(55))
        assert np.array_equal(a, b)


class TestColorJitter:
    def test_unit_gains_identity(self):
        img = _img(19)
        assert np.array_equal(color_jitter(img, (1.0, 1.0, 1.0)), img)

    def test_half_gain_halves_channel(self):
        img = np.full((8, 8, 3), 200, dtype=np.uint8)
        out = color_jitter(img, (0.5, 1.0, 1.0))
        assert np.all(out[:, :, 0] == 100)
        assert np.all(out[:, :, 1:] == 200)

    def test_channel_means_scale_with_gains(self, rng):
        img = _img(20, size=256)
        gains = rng.uniform(0.9, 1.1, size=3)
        out = color_jitter(img, gains)
        for c in range(3):
            expected = np.clip(np.rint(img[:, :, c] * gains[c]), 0, 255).mean()
            assert out[:, :, c].mean() == pytest.approx(expected, rel=0.01)

    def test_out_of_range_gain_rejected(self):
        with pytest.raises(ParameterError):
            color_jitter(_img(21), (0.4, 1.0, 1.0))
