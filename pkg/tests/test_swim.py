import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import textured_color
from contourcodec.image_io import ColorImage
from contourcodec.swim import (
    SwimConfig,
    best_match,
    block_distortion,
    block_proxy,
    haar_row,
    laplace_fit,
    laplace_ks,
    luminance,
    row_distortion,
    swim_score,
    window_anchor,
)

SQRT2 = math.sqrt(2.0)


class TestHaar:
    def test_constant_row_has_no_detail(self):
        assert haar_row([2, 2, 2, 2]).tolist() == [0, 0, 0]

    def test_alternating_row(self):
        got = haar_row([1, -1, 1, -1])
        assert got == pytest.approx([SQRT2, SQRT2, 0.0], abs=1e-12)

    def test_output_length_and_level_order(self):
        out = haar_row(np.arange(16.0))
        assert out.shape == (15,)
        # level 1 first: eight pairwise differences of a linear ramp
        assert out[:8] == pytest.approx([-1 / SQRT2] * 8)

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError):
            haar_row([1.0, 2.0, 3.0])

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_linearity(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=8)
        b = rng.normal(size=8)
        assert haar_row(a + b) == pytest.approx((haar_row(a) + haar_row(b)).tolist(), abs=1e-9)

    def test_orthonormal_energy(self, rng):
        row = rng.normal(size=16)
        coeffs = haar_row(row)
        approx = row.sum() / 4.0  # the dropped scaling coefficient of 16 samples
        assert np.dot(row, row) == pytest.approx(np.dot(coeffs, coeffs) + approx * approx)


class TestBestMatch:
    def test_identical_images_match_at_zero(self, rng):
        lum = luminance(textured_color(rng, 32, 48))
        block, shift = best_match(lum, lum, 8, 16, SwimConfig(block=8, window=5))
        assert shift == 0
        assert np.array_equal(block, lum[8:16, 16:24])

    def test_pure_shift_recovered(self, rng):
        lum = luminance(textured_color(rng, 24, 64))
        ref = np.roll(lum, 3, axis=1)  # content moves right by 3
        _, shift = best_match(lum, ref, 8, 16, SwimConfig(block=8, window=5))
        assert shift == 3

    def test_window_zero_is_colocated(self, rng):
        lum = luminance(textured_color(rng, 16, 16))
        block, shift = best_match(lum, np.zeros_like(lum), 0, 0, SwimConfig(block=16, window=0))
        assert shift == 0 and block.shape == (16, 16)


class TestBlockDistortion:
    def test_identical_blocks(self, rng):
        c = rng.normal(size=(8, 7))
        assert block_distortion(c, c.copy(), 10) == 0.0

    def test_disjoint_constant_blocks(self):
        c_o = np.zeros((8, 7))
        c_s = np.ones((8, 7))
        assert block_distortion(c_s, c_o, 2) == 1.0

    def test_permutation_invariance(self, rng):
        c_o = rng.normal(size=(8, 7))
        c_s = rng.normal(size=(8, 7))
        d0 = block_distortion(c_s, c_o, 10)
        perm = rng.permutation(c_s.ravel()).reshape(c_s.shape)
        assert block_distortion(perm, c_o, 10) == d0

    def test_zero_range(self):
        c = np.full((4, 3), 5.0)
        assert block_distortion(c, c, 10) == 0.0


class TestSwimScore:
    def test_identical_images(self, rng):
        img = textured_color(rng, 48, 64)
        d, s = swim_score(img, img, SwimConfig())
        assert d == 0.0 and s == 1.0

    def test_noise_ladder_is_monotone(self, rng):
        ref = textured_color(rng, 48, 64)
        cfg = SwimConfig()
        scores = []
        for sigma in (8, 32, 90):
            noisy = np.clip(
                ref.pixels.astype(float) + rng.normal(0, sigma, ref.pixels.shape), 0, 255
            ).astype(np.uint8)
            scores.append(swim_score(ColorImage(noisy), ref, cfg)[1])
        assert scores[0] > scores[1] > scores[2]

    def test_block_count_normalization(self, rng):
        img = textured_color(rng, 40, 70)
        other = textured_color(np.random.default_rng(99), 40, 70)
        cfg = SwimConfig(block=16, window=2)
        from contourcodec.swim import block_scores

        scores = block_scores(img, other, cfg)
        assert scores.shape == (40 // 16, 70 // 16)
        d, _ = swim_score(img, other, cfg)
        assert d == pytest.approx(scores.sum() / scores.size)

    def test_too_small_image_rejected(self, rng):
        img = textured_color(rng, 8, 8)
        with pytest.raises(ValueError, match="smaller than one block"):
            swim_score(img, img, SwimConfig(block=16))

    def test_translation_robustness(self, rng):
        # a small global shift re-matches inside the search window, while the
        # same comparison without search sees a large distortion; a constant
        # margin keeps the shift from dragging new content into edge blocks
        pix = textured_color(rng, 48, 96).pixels.copy()
        pix[:, :24] = (120, 90, 60)
        ref = ColorImage(pix)
        moved = pix.copy()
        moved[:, 4:] = pix[:, :-4]
        moved[:, :4] = (120, 90, 60)
        shifted = ColorImage(moved)
        d_matched, _ = swim_score(shifted, ref, SwimConfig(block=16, window=10))
        d_unmatched, _ = swim_score(shifted, ref, SwimConfig(block=16, window=0))
        assert d_unmatched > 0
        assert d_matched <= 0.05 * d_unmatched


class TestLaplace:
    def test_fit_mean_absolute(self):
        assert laplace_fit([1, -1, 2, -2]) == 1.5
        assert laplace_fit([0.0, 0.0]) == 0.0

    def test_fit_empty_rejected(self):
        with pytest.raises(ValueError):
            laplace_fit([])

    def test_fit_is_maximum_likelihood(self, rng):
        def loglik(sigma, data):
            return -data.size * math.log(2.0 * sigma) - np.abs(data).sum() / sigma

        for _ in range(25):
            data = rng.laplace(0, rng.uniform(0.2, 5.0), size=40)
            s = laplace_fit(data)
            assert loglik(s, data) >= loglik(s - 1e-3, data)
            assert loglik(s, data) >= loglik(s + 1e-3, data)

    def test_ks_equal_scales(self):
        assert laplace_ks(0.7, 0.7) == 0.0
        assert laplace_ks(0.0, 0.0) == 0.0

    def test_ks_known_values(self):
        assert laplace_ks(1.0, 2.0) == pytest.approx(0.25, abs=1e-12)
        assert laplace_ks(1.0, 3.0) == pytest.approx(3 ** -0.5 - 3 ** -1.5, abs=1e-12)

    def test_ks_one_sided_zero(self):
        assert laplace_ks(0.0, 2.0) == 1.0

    def test_ks_negative_rejected(self):
        with pytest.raises(ValueError):
            laplace_ks(-1.0, 1.0)

    @given(st.floats(0.1, 10.0), st.floats(0.1, 10.0))
    @settings(max_examples=50, deadline=None)
    def test_ks_symmetry_and_range(self, a, b):
        v = laplace_ks(a, b)
        assert v == laplace_ks(b, a)
        assert 0.0 <= v <= 1.0

    def test_ks_increases_with_scale_ratio(self):
        values = [laplace_ks(1.0, r) for r in (1.5, 2.0, 4.0, 9.0)]
        assert values == sorted(values)
        assert values[0] > 0

    def test_ks_matches_grid_oracle(self, rng):
        for _ in range(25):
            sa, sb = rng.uniform(0.1, 10.0, size=2)
            assert laplace_ks(sa, sb) == pytest.approx(
                2.0 * _grid_ks(sa, sb), abs=1e-9
            )


def _laplace_cdf(c, sigma):
    c = np.asarray(c, float)
    neg = 0.5 * np.exp(np.minimum(c, 0.0) / sigma)
    pos = 1.0 - 0.5 * np.exp(-np.maximum(c, 0.0) / sigma)
    return np.where(c < 0, neg, pos)


def _grid_ks(sa, sb):
    """Refined grid search for max |F_a - F_b|; no closed form used."""
    hi = max(sa, sb)
    lo_edge, hi_edge = -30.0 * hi, 30.0 * hi
    for _ in range(4):
        grid = np.linspace(lo_edge, hi_edge, 8193)
        gap = np.abs(_laplace_cdf(grid, sa) - _laplace_cdf(grid, sb))
        i = int(np.argmax(gap))
        step = grid[1] - grid[0]
        lo_edge, hi_edge = grid[i] - 2 * step, grid[i] + 2 * step
    return float(gap.max())


class TestRowDistortion:
    def test_zero_shift_is_zero(self, rng):
        img = textured_color(rng, 24, 64)
        assert row_distortion(img, 5, 16, 20, 20, SwimConfig()) == 0.0

    def test_beyond_window_is_infinite(self, rng):
        img = textured_color(rng, 24, 64)
        cfg = SwimConfig(block=16, window=10)
        assert row_distortion(img, 5, 16, 20, 20 + cfg.window + 1, cfg) == math.inf

    def test_constant_row_any_shift_is_zero(self):
        img = ColorImage(np.full((8, 64, 3), 77, np.uint8))
        cfg = SwimConfig(block=16, window=10)
        for k in (-10, -3, 1, 10):
            assert row_distortion(img, 3, 16, 30, 30 + k, cfg) == 0.0

    def test_truncated_comparison_window_is_infinite(self, rng):
        img = textured_color(rng, 8, 32)
        cfg = SwimConfig(block=16, window=10)
        # shifting right by 8 pushes the comparison window past the left edge
        assert row_distortion(img, 2, 0, 4, 12, cfg) == math.inf

    def test_row_bounds_checked(self, rng):
        img = textured_color(rng, 8, 32)
        with pytest.raises(ValueError, match="row out of image"):
            row_distortion(img, 9, 0, 4, 4, SwimConfig())

    def test_window_anchor(self):
        assert window_anchor(20, 64, 16) == 16
        assert window_anchor(62, 64, 16) == 48  # clamped to fit
        assert window_anchor(3, 64, 16) == 0
        with pytest.raises(ValueError):
            window_anchor(3, 8, 16)


class TestBlockProxy:
    def test_all_zero(self):
        assert block_proxy([0.0] * 16) == 0.0

    def test_infinity_absorbs(self):
        assert block_proxy([0.1, math.inf, 0.2]) == math.inf

    def test_plain_sum(self):
        assert block_proxy([0.25] * 16) == pytest.approx(4.0)


class TestUpperBound:
    def test_rowwise_bound_holds(self, rng):
        """Block KS distance never exceeds the sum of per-row KS distances
        when every row is binned on the shared grid."""
        bins = 10
        for _ in range(200):
            c_o = rng.normal(size=(8, 7))
            c_s = rng.normal(size=(8, 7))
            lo = min(c_o.min(), c_s.min())
            hi = max(c_o.max(), c_s.max())
            f_o = np.stack([np.cumsum(np.histogram(r, bins, (lo, hi))[0]) for r in c_o])
            f_s = np.stack([np.cumsum(np.histogram(r, bins, (lo, hi))[0]) for r in c_s])
            block = np.max(np.abs(f_o.sum(axis=0) - f_s.sum(axis=0)))
            rows = np.abs(f_o - f_s).max(axis=1).sum()
            assert block <= rows + 1e-12
