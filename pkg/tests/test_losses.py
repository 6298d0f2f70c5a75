import math

import numpy as np
import pytest

from changeforge.codec import ChangeBox, CodecConfig, TargetMaps, encode_targets, peak_cells
from changeforge.losses import (
    LossConfig,
    ShapeMismatchError,
    combine_components,
    heatmap_loss,
    loss_gradients,
    offset_loss,
    total_loss,
    wh_loss,
)

SMALL_CFG = CodecConfig(input_resolution=64, map_resolution=16, stride=4)


def _random_targets(rng, n_boxes=2):
    boxes = []
    cells = set()
    while len(boxes) < n_boxes:
        w = rng.uniform(6, 30)
        h = rng.uniform(6, 30)
        cx = rng.uniform(w / 2, 64 - w / 2)
        cy = rng.uniform(h / 2, 64 - h / 2)
        cell = (int(cx // 4), int(cy // 4))
        if cell not in cells:
            cells.add(cell)
            boxes.append(ChangeBox(cx=cx, cy=cy, w=w, h=h))
    return encode_targets(boxes, SMALL_CFG)


def _random_predictions(rng, targets):
    r = targets.hm.shape[0]
    y_hm = rng.uniform(0.05, 0.95, size=(r, r))
    y_wh = rng.uniform(0, 40, size=(r, r, 2))
    y_off = rng.uniform(0, 1, size=(r, r, 2))
    # keep L1 terms away from their kink so finite differences are valid
    for x, cy in peak_cells(targets):
        for c in range(2):
            if abs(y_wh[cy, x, c] - targets.wh[cy, x, c]) < 0.01:
                y_wh[cy, x, c] += 0.05
            if abs(y_off[cy, x, c] - targets.offset[cy, x, c]) < 0.01:
                y_off[cy, x, c] += 0.05
    return TargetMaps(hm=y_hm, wh=y_wh, offset=y_off)


class TestHeatmapLoss:
    def test_exact_pattern_gives_zero(self):
        targets = _random_targets(np.random.default_rng(0))
        y = np.where(targets.hm == 1.0, 1.0, 0.0)
        assert heatmap_loss(y, targets.hm) == pytest.approx(0.0, abs=1e-10)

    def test_single_cell_value(self):
        g = np.ones((1, 1))
        y = np.full((1, 1), 0.5)
        expected = -((0.5) ** 2) * math.log(0.5)  # ~0.1733
        assert heatmap_loss(y, g) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.1733, abs=1e-4)

    def test_zero_prediction_kills_tail_term(self):
        g = np.array([[1.0, math.exp(-0.5)]])
        y = np.array([[1.0, 0.0]])
        assert heatmap_loss(y, g) == pytest.approx(0.0, abs=1e-10)

    def test_permutation_invariance(self, rng):
        targets = _random_targets(rng)
        y = rng.uniform(0.05, 0.95, size=targets.hm.shape)
        perm = rng.permutation(targets.hm.size)
        yp = y.ravel()[perm].reshape(y.shape)
        gp = targets.hm.ravel()[perm].reshape(y.shape)
        assert heatmap_loss(y, targets.hm) == pytest.approx(
            heatmap_loss(yp, gp), rel=1e-12
        )

    def test_no_peaks_still_penalizes_false_positives(self):
        g = np.zeros((4, 4))
        y = np.full((4, 4), 0.5)
        assert heatmap_loss(y, g) > 0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            heatmap_loss(np.zeros((2, 2)), np.zeros((3, 3)))


class TestMaskedL1:
    def test_identity_zero(self):
        y = np.zeros((4, 4, 2))
        assert offset_loss(y, y, [(1, 1)]) == 0.0
        assert wh_loss(y, y, [(1, 1)]) == 0.0

    def test_offset_example(self):
        y = np.zeros((4, 4, 2))
        g = np.zeros((4, 4, 2))
        y[2, 1] = (0.5, 0.5)
        g[2, 1] = (0.25, 0.5)
        assert offset_loss(y, g, [(1, 2)]) == pytest.approx(0.25)

    def test_wh_example(self):
        y = np.zeros((4, 4, 2))
        g = np.zeros((4, 4, 2))
        g[0, 0] = (40, 80)
        y[0, 0] = (44, 70)
        assert wh_loss(y, g, [(0, 0)]) == pytest.approx(14.0)

    def test_two_peaks_average(self):
        y = np.zeros((4, 4, 2))
        g = np.zeros((4, 4, 2))
        g[0, 0] = (40, 80)
        y[0, 0] = (44, 70)  # per-peak sum 14
        g[2, 2] = (10, 10)
        y[2, 2] = (12, 14)  # per-peak sum 6
        assert wh_loss(y, g, [(0, 0), (2, 2)]) == pytest.approx(10.0)

    def test_non_peak_cells_ignored(self, rng):
        y = np.zeros((4, 4, 2))
        g = np.zeros((4, 4, 2))
        y[2, 1] = (0.5, 0.5)
        g[2, 1] = (0.25, 0.5)
        base = offset_loss(y, g, [(1, 2)])
        y2 = y.copy()
        y2[0, 3] = rng.uniform(-100, 100, 2)
        assert offset_loss(y2, g, [(1, 2)]) == base

    def test_no_peaks_is_zero(self):
        assert offset_loss(np.ones((2, 2, 2)), np.zeros((2, 2, 2)), []) == 0.0


class TestTotalLoss:
    def test_weighting_arithmetic(self):
        # 2.65 up to the one-ulp gap inherent in binary floats
        total = combine_components(1.0, 14.0, 0.25, LossConfig())
        assert abs(total - 2.65) <= math.ulp(2.65)

    def test_perfect_prediction_zero(self):
        targets = _random_targets(np.random.default_rng(1))
        pred = TargetMaps(
            hm=np.where(targets.hm == 1.0, 1.0, 0.0),
            wh=targets.wh.copy(),
            offset=targets.offset.copy(),
        )
        report = total_loss(pred, targets)
        assert report.total == pytest.approx(0.0, abs=1e-10)

    def test_report_invariant(self, rng):
        targets = _random_targets(rng)
        pred = _random_predictions(rng, targets)
        cfg = LossConfig()
        report = total_loss(pred, targets, cfg)
        assert report.total == pytest.approx(
            report.l_hm + cfg.lambda_wh * report.l_wh + cfg.lambda_offset * report.l_offset,
            rel=1e-15,
        )
        assert report.l_hm >= 0 and report.l_wh >= 0 and report.l_offset >= 0
        assert report.n_peaks == 2

    def test_zero_lambda_wh_ignores_wh(self, rng):
        targets = _random_targets(rng)
        pred = _random_predictions(rng, targets)
        cfg = LossConfig(lambda_wh=0.0)
        r1 = total_loss(pred, targets, cfg)
        pred2 = TargetMaps(hm=pred.hm, wh=pred.wh + 100.0, offset=pred.offset)
        r2 = total_loss(pred2, targets, cfg)
        assert r1.total == r2.total

    def test_doubling_lambda_offset_doubles_contribution(self, rng):
        targets = _random_targets(rng)
        pred = _random_predictions(rng, targets)
        r1 = total_loss(pred, targets, LossConfig(lambda_offset=1.0))
        r2 = total_loss(pred, targets, LossConfig(lambda_offset=2.0))
        assert r2.total - r2.l_hm - 0.1 * r2.l_wh == pytest.approx(
            2 * (r1.total - r1.l_hm - 0.1 * r1.l_wh), rel=1e-12
        )


class TestGradients:
    def test_wh_gradient_is_scaled_sign(self, rng):
        targets = _random_targets(rng, n_boxes=2)
        pred = _random_predictions(rng, targets)
        cfg = LossConfig()
        grads = loss_gradients(pred, targets, cfg)
        peaks = peak_cells(targets)
        for x, cy in peaks:
            expected = cfg.lambda_wh * np.sign(
                pred.wh[cy, x] - targets.wh[cy, x]
            ) / len(peaks)
            assert np.allclose(grads.wh[cy, x], expected)
        # zero off-peak
        mask = np.ones(grads.wh.shape[:2], dtype=bool)
        for x, cy in peaks:
            mask[cy, x] = False
        assert np.all(grads.wh[mask] == 0)

    def test_gradient_zero_at_offset_optimum(self, rng):
        targets = _random_targets(rng)
        pred = TargetMaps(
            hm=rng.uniform(0.05, 0.95, size=targets.hm.shape),
            wh=targets.wh.copy(),
            offset=targets.offset.copy(),
        )
        grads = loss_gradients(pred, targets)
        assert np.all(grads.offset == 0)
        assert np.all(grads.wh == 0)

    def test_hm_gradient_matches_finite_differences(self, rng):
        cfg = LossConfig()
        step = 1e-4
        targets = _random_targets(rng)
        pred = _random_predictions(rng, targets)
        grads = loss_gradients(pred, targets, cfg)
        r = targets.hm.shape[0]
        for _ in range(50):
            i, j = int(rng.integers(r)), int(rng.integers(r))
            hm_plus = pred.hm.copy()
            hm_plus[i, j] += step
            hm_minus = pred.hm.copy()
            hm_minus[i, j] -= step
            fd = (
                heatmap_loss(hm_plus, targets.hm, cfg)
                - heatmap_loss(hm_minus, targets.hm, cfg)
            ) / (2 * step)
            assert grads.hm[i, j] == pytest.approx(fd, rel=1e-4, abs=1e-9)
