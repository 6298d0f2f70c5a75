"""Training objective: focal-variant heatmap loss, L1 size/offset losses,
their weighted total, and analytic gradients with respect to the
prediction maps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .codec import TargetMaps, peak_cells


class ShapeMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 2.0
    beta: float = 4.0
    lambda_wh: float = 0.1
    lambda_offset: float = 1.0
    epsilon: float = 1e-7  # log clamp

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.lambda_wh < 0 or self.lambda_offset < 0:
            raise ValueError("lambda weights must be non-negative")


@dataclass(frozen=True)
class LossReport:
    l_hm: float
    l_wh: float
    l_offset: float
    total: float
    n_peaks: int


def combine_components(l_hm: float, l_wh: float, l_offset: float, cfg: LossConfig) -> float:
    """Weighted total: L_hm + lambda_wh * L_wh + lambda_offset * L_offset.

    Summed with fsum so the result is the correctly rounded float.
    """
    return math.fsum((l_hm, cfg.lambda_wh * l_wh, cfg.lambda_offset * l_offset))


def _check_shapes(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")


def _clamp(y: np.ndarray, eps: float) -> np.ndarray:
    return np.clip(np.asarray(y, dtype=np.float64), eps, 1.0 - eps)


def heatmap_loss(y_hm: np.ndarray, g_hm: np.ndarray, cfg: LossConfig = LossConfig()) -> float:
    """Focal-variant loss over the heatmap, normalized by the peak count
    (clamped to at least 1)."""
    y_hm = np.asarray(y_hm, dtype=np.float64)
    g_hm = np.asarray(g_hm, dtype=np.float64)
    _check_shapes(y_hm, g_hm)
    total, n_pos = kernels.focal_sum(_clamp(y_hm, cfg.epsilon), g_hm, cfg.alpha, cfg.beta)
    return total / max(1, n_pos)


def _masked_l1(y: np.ndarray, g: np.ndarray, cells) -> float:
    y = np.asarray(y, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    _check_shapes(y, g)
    if not cells:
        return 0.0
    acc = 0.0
    for x, cy in cells:
        acc += float(np.abs(y[cy, x] - g[cy, x]).sum())
    return acc / len(cells)


def offset_loss(y_offset, g_offset, peaks) -> float:
    """Mean per-peak L1 over the two offset components (non-peak cells ignored)."""
    return _masked_l1(y_offset, g_offset, peaks)


def wh_loss(y_wh, g_wh, peaks) -> float:
    """Mean per-peak L1 over the (w, h) components (non-peak cells ignored)."""
    return _masked_l1(y_wh, g_wh, peaks)


def total_loss(predictions: TargetMaps, targets: TargetMaps, cfg: LossConfig = LossConfig()) -> LossReport:
    _check_shapes(predictions.hm, targets.hm)
    peaks = peak_cells(targets)
    l_hm = heatmap_loss(predictions.hm, targets.hm, cfg)
    l_wh = wh_loss(predictions.wh, targets.wh, peaks)
    l_off = offset_loss(predictions.offset, targets.offset, peaks)
    return LossReport(
        l_hm=l_hm,
        l_wh=l_wh,
        l_offset=l_off,
        total=combine_components(l_hm, l_wh, l_off, cfg),
        n_peaks=len(peaks),
    )


def loss_gradients(predictions: TargetMaps, targets: TargetMaps, cfg: LossConfig = LossConfig()) -> TargetMaps:
    """Exact partials of total_loss w.r.t. every prediction value.

    The L1 subgradient at Y == G is taken as 0; wh/offset gradients are
    zero away from peak cells.  Heatmap values outside the [eps, 1-eps]
    clamp have zero gradient (the clamp is flat there).
    """
    _check_shapes(predictions.hm, targets.hm)
    peaks = peak_cells(targets)
    n_hm = max(1, int((targets.hm == 1.0).sum()))
    y = np.asarray(predictions.hm, dtype=np.float64)
    grad_hm = kernels.focal_grad(_clamp(y, cfg.epsilon), targets.hm, cfg.alpha, cfg.beta)
    grad_hm = grad_hm / n_hm
    grad_hm[(y < cfg.epsilon) | (y > 1.0 - cfg.epsilon)] = 0.0

    grad_wh = np.zeros_like(np.asarray(predictions.wh, dtype=np.float64))
    grad_off = np.zeros_like(grad_wh)
    if peaks:
        n = len(peaks)
        for x, cy in peaks:
            grad_wh[cy, x] = (
                cfg.lambda_wh * np.sign(predictions.wh[cy, x] - targets.wh[cy, x]) / n
            )
            grad_off[cy, x] = (
                cfg.lambda_offset
                * np.sign(predictions.offset[cy, x] - targets.offset[cy, x])
                / n
            )
    return TargetMaps(hm=grad_hm, wh=grad_wh, offset=grad_off)
