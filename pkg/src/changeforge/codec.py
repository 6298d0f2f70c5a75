"""Box <-> map codec: Gaussian target encoding and peak decoding."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

log = logging.getLogger(__name__)


class EncodeError(ValueError):
    """A box cannot be encoded at the configured resolution."""


@dataclass(frozen=True)
class ChangeBox:
    """Axis-aligned box: center (cx, cy) and size (w, h), in input pixels."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box must have positive size, got {self}")

    def corners(self):
        return (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )


@dataclass(frozen=True)
class Detection:
    box: ChangeBox
    score: float

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class CodecConfig:
    input_resolution: int = 512
    map_resolution: int = 128
    stride: int = 4
    peak_threshold: float = 0.3
    max_detections: int = 100

    def __post_init__(self):
        if self.input_resolution != self.stride * self.map_resolution:
            raise ValueError(
                "input_resolution must equal stride * map_resolution, got "
                f"{self.input_resolution} != {self.stride} * {self.map_resolution}"
            )
        if not (0.0 <= self.peak_threshold <= 1.0):
            raise ValueError("peak_threshold must lie in [0, 1]")


@dataclass
class TargetMaps:
    """Heatmap plus size/offset regression maps at map resolution.

    hm is (R, R) in [0, 1]; wh is (R, R, 2) in input pixels; offset is
    (R, R, 2) in [0, 1) cell fractions.  Ground truth has wh/offset
    nonzero only at peak cells; predictions may be dense.
    """

    hm: np.ndarray
    wh: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        r = self.hm.shape[0]
        if self.hm.shape != (r, r):
            raise ValueError(f"hm must be square, got {self.hm.shape}")
        if self.wh.shape != (r, r, 2) or self.offset.shape != (r, r, 2):
            raise ValueError("wh and offset must be (R, R, 2) matching hm")

    @classmethod
    def zeros(cls, resolution: int) -> "TargetMaps":
        return cls(
            hm=np.zeros((resolution, resolution), dtype=np.float64),
            wh=np.zeros((resolution, resolution, 2), dtype=np.float64),
            offset=np.zeros((resolution, resolution, 2), dtype=np.float64),
        )


def gaussian_sigma(w: float, h: float, stride: int = 4) -> float:
    """Spread (in map cells) of the Gaussian splat for a w x h box.

    Takes the largest Euclidean displacement r (in cells) such that the
    box shifted by r in its worst direction (the diagonal) still overlaps
    itself with IoU >= 0.7, and returns max(1, r/3).  The IoU condition
    reduces to a quadratic in the per-axis component u = r/sqrt(2).
    """
    if w <= 0 or h <= 0:
        raise ValueError("box size must be positive")
    wc, hc = w / stride, h / stride
    # (wc - u)(hc - u) / (2*wc*hc - (wc - u)(hc - u)) = 0.7
    # => u^2 - (wc + hc) u + (3/17) wc hc = 0, take the smaller root
    b = wc + hc
    c = (3.0 / 17.0) * wc * hc
    u = (b - math.sqrt(b * b - 4.0 * c)) / 2.0
    return max(1.0, math.sqrt(2.0) * u / 3.0)


def encode_targets(boxes, cfg: CodecConfig) -> TargetMaps:
    """Render ground-truth maps for a list of ChangeBoxes (Gaussian peaks
    max-merged; wh/offset written at peak cells only)."""
    res = cfg.input_resolution
    maps = TargetMaps.zeros(cfg.map_resolution)
    if not boxes:
        return maps
    pxs, pys, sigmas = [], [], []
    seen = {}
    for i, b in enumerate(boxes):
        x0, y0, x1, y1 = b.corners()
        if x0 < 0 or y0 < 0 or x1 > res or y1 > res:
            raise EncodeError(f"box {b} outside {res}x{res} input bounds")
        px = int(b.cx // cfg.stride)
        py = int(b.cy // cfg.stride)
        px = min(px, cfg.map_resolution - 1)
        py = min(py, cfg.map_resolution - 1)
        if (px, py) in seen:
            log.warning(
                "peak-cell collision at (%d, %d): box %d overwrites box %d",
                px,
                py,
                i,
                seen[(px, py)],
            )
        seen[(px, py)] = i
        maps.wh[py, px] = (b.w, b.h)
        maps.offset[py, px] = (
            b.cx / cfg.stride - math.floor(b.cx / cfg.stride),
            b.cy / cfg.stride - math.floor(b.cy / cfg.stride),
        )
        pxs.append(px)
        pys.append(py)
        sigmas.append(gaussian_sigma(b.w, b.h, cfg.stride))
    kernels.splat_gaussians(maps.hm, np.array(pxs), np.array(pys), np.array(sigmas))
    return maps


def peak_cells(maps: TargetMaps):
    """Row-major (x, y) cells where the ground-truth heatmap equals 1."""
    ys, xs = np.nonzero(maps.hm == 1.0)
    return list(zip(xs.tolist(), ys.tolist()))


def decode_maps(maps: TargetMaps, cfg: CodecConfig):
    """Extract detections: 8-neighbor local maxima above the threshold.

    Results are sorted by descending score with row-major cell index as
    the tie-break, truncated to max_detections.
    """
    if maps.hm.shape[0] != cfg.map_resolution:
        raise ValueError(
            f"map resolution {maps.hm.shape[0]} != configured {cfg.map_resolution}"
        )
    mask = kernels.local_peaks(maps.hm, cfg.peak_threshold)
    ys, xs = np.nonzero(mask)  # np.nonzero is row-major ordered
    cells = sorted(
        zip(ys.tolist(), xs.tolist()),
        key=lambda c: (-maps.hm[c[0], c[1]], c[0] * maps.hm.shape[1] + c[1]),
    )
    dets = []
    for y, x in cells[: cfg.max_detections]:
        ox, oy = maps.offset[y, x]
        w, h = maps.wh[y, x]
        if w <= 0 or h <= 0:
            continue
        dets.append(
            Detection(
                box=ChangeBox(
                    cx=(x + ox) * cfg.stride, cy=(y + oy) * cfg.stride, w=w, h=h
                ),
                score=float(min(1.0, max(0.0, maps.hm[y, x]))),
            )
        )
    return dets
