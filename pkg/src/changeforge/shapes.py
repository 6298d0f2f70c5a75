"""Samplers for change geometry: anchor rects and irregular polygons."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .imageops import Rect


class SamplingError(ValueError):
    """The image cannot host the requested geometry."""


class RasterizationError(ValueError):
    """Degenerate polygon with no rasterizable area."""


# (short:long ratio, weight): 1:1, 1:2, 1:3 at weight 3; 1:5, 1:7 at weight 2
DEFAULT_ASPECT_RATIOS = ((1.0, 3.0), (2.0, 3.0), (3.0, 3.0), (5.0, 2.0), (7.0, 2.0))
# (area-fraction low, high, weight): small / medium / large at 4:2:1
DEFAULT_AREA_BINS = ((0.005, 0.05, 4.0), (0.05, 0.25, 2.0), (0.25, 0.5, 1.0))


@dataclass(frozen=True)
class AnchorSpec:
    aspect_ratios: tuple = DEFAULT_ASPECT_RATIOS
    swap_probability: float = 0.5
    area_bins: tuple = DEFAULT_AREA_BINS

    def __post_init__(self):
        if not self.aspect_ratios or not self.area_bins:
            raise SamplingError("aspect_ratios and area_bins must be non-empty")
        for k, w in self.aspect_ratios:
            if k <= 0 or w <= 0:
                raise SamplingError(f"bad aspect ratio entry ({k}, {w})")
        prev_hi = 0.0
        for lo, hi, w in self.area_bins:
            if not (0.0 < lo < hi) or w <= 0 or lo < prev_hi:
                raise SamplingError(f"bad area bin ({lo}, {hi}, {w})")
            prev_hi = hi


@dataclass(frozen=True)
class PolygonSpec:
    avg_radius: float
    center: tuple = (0.0, 0.0)
    n: int = 10
    irregularity: float = 0.5
    spikiness: float = 0.1

    def __post_init__(self):
        if self.n < 3:
            raise SamplingError(f"need n >= 3 vertices, got {self.n}")
        if not (0.0 <= self.irregularity <= 1.0 and 0.0 <= self.spikiness <= 1.0):
            raise SamplingError("irregularity and spikiness must lie in [0, 1]")
        if self.avg_radius <= 0:
            raise SamplingError("avg_radius must be positive")


@dataclass(frozen=True)
class Polygon:
    vertices: tuple  # ordered (x, y) pairs, angles about center increasing

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise SamplingError("polygon needs at least 3 vertices")

    def as_arrays(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        return v[:, 0], v[:, 1]

    def shoelace_area(self) -> float:
        xs, ys = self.as_arrays()
        return 0.5 * abs(
            np.dot(xs, np.roll(ys, -1)) - np.dot(ys, np.roll(xs, -1))
        )

    def bbox(self) -> Rect:
        xs, ys = self.as_arrays()
        x0 = int(math.floor(xs.min()))
        y0 = int(math.floor(ys.min()))
        x1 = int(math.ceil(xs.max()))
        y1 = int(math.ceil(ys.max()))
        return Rect(x0, y0, max(1, x1 - x0), max(1, y1 - y0))

    def translated(self, dx: float, dy: float) -> "Polygon":
        return Polygon(tuple((x + dx, y + dy) for x, y in self.vertices))


# ---------------------------------------------------------------------------
# Anchor-rect sampling
# ---------------------------------------------------------------------------

def _area_cap(ratio: float, w_lim: float, h_lim: float) -> float:
    # largest area of a 1:ratio box (short side w) fitting in w_lim x h_lim
    return min(w_lim * w_lim * ratio, h_lim * h_lim / ratio)


def _joint_table(image_w: int, image_h: int, spec: AnchorSpec) -> np.ndarray:
    """Joint (ratio, bin) probabilities matching both weight marginals.

    Some cells can be geometrically impossible (e.g. a 1:7 box in the
    largest area bin of a square image).  Iterative proportional fitting
    over the feasible cells preserves the 3:3:3:2:2 and 4:2:1 marginals
    exactly despite those holes.
    """
    total_area = float(image_w) * float(image_h)
    nr = len(spec.aspect_ratios)
    nb = len(spec.area_bins)
    feasible = np.zeros((nr, nb), dtype=bool)
    for i, (ratio, _) in enumerate(spec.aspect_ratios):
        cap = max(
            _area_cap(ratio, image_w, image_h), _area_cap(ratio, image_h, image_w)
        )
        for j, (lo, hi, _) in enumerate(spec.area_bins):
            feasible[i, j] = lo * total_area < min(hi * total_area, cap) and (
                lo * total_area >= 1.0 or hi * total_area > 1.0
            )
    row_t = np.array([w for _, w in spec.aspect_ratios], dtype=np.float64)
    col_t = np.array([w for _, _, w in spec.area_bins], dtype=np.float64)
    row_t /= row_t.sum()
    col_t /= col_t.sum()
    joint = np.outer(row_t, col_t) * feasible
    if joint.sum() == 0:
        raise SamplingError(f"image {image_w}x{image_h} too small for any anchor bin")
    for _ in range(500):
        rs = joint.sum(axis=1)
        if np.any((rs == 0) & (row_t > 0)):
            raise SamplingError("anchor spec marginals are unsatisfiable on this image")
        joint *= np.where(rs > 0, row_t / np.maximum(rs, 1e-300), 0.0)[:, None]
        cs = joint.sum(axis=0)
        if np.any((cs == 0) & (col_t > 0)):
            raise SamplingError("anchor spec marginals are unsatisfiable on this image")
        joint *= np.where(cs > 0, col_t / np.maximum(cs, 1e-300), 0.0)[None, :]
        if np.abs(joint.sum(axis=1) - row_t).max() < 1e-13:
            break
    if np.abs(joint.sum(axis=1) - row_t).max() > 1e-9 or (
        np.abs(joint.sum(axis=0) - col_t).max() > 1e-9
    ):
        raise SamplingError("anchor spec marginals are unsatisfiable on this image")
    return joint / joint.sum()


_JOINT_CACHE: dict = {}


def _cached_joint(image_w: int, image_h: int, spec: AnchorSpec) -> np.ndarray:
    key = (image_w, image_h, spec.aspect_ratios, spec.area_bins)
    if key not in _JOINT_CACHE:
        _JOINT_CACHE[key] = _joint_table(image_w, image_h, spec)
    return _JOINT_CACHE[key]


def sample_anchor_shape(image_w, image_h, spec, rng):
    """Sample (ratio_index, bin_index, w, h) honoring both weight marginals."""
    joint = _cached_joint(image_w, image_h, spec)
    flat = joint.ravel()
    idx = int(rng.choice(flat.size, p=flat))
    ri, bi = divmod(idx, joint.shape[1])
    ratio = spec.aspect_ratios[ri][0]
    lo, hi, _ = spec.area_bins[bi]
    total_area = float(image_w) * float(image_h)

    tall = rng.random() < spec.swap_probability  # short side horizontal
    for _ in range(200):
        w_lim, h_lim = (image_w, image_h) if tall else (image_h, image_w)
        cap = _area_cap(ratio, w_lim, h_lim)
        a_lo, a_hi = lo * total_area, min(hi * total_area, cap)
        if a_lo >= a_hi:
            tall = not tall
            continue
        area = rng.uniform(a_lo, a_hi)
        short = math.sqrt(area / ratio)
        long = math.sqrt(area * ratio)
        w, h = (short, long) if tall else (long, short)
        wi, hi_px = max(1, round(w)), max(1, round(h))
        frac = (wi * hi_px) / total_area
        if lo <= frac < hi and wi <= image_w and hi_px <= image_h:
            return ri, bi, wi, hi_px
    raise SamplingError(
        f"could not realize anchor bin [{lo}, {hi}) at ratio 1:{ratio} "
        f"in {image_w}x{image_h}"
    )


def sample_anchor_rect(image_w, image_h, spec: AnchorSpec, rng) -> Rect:
    """Sample a fully-inside rect per the anchor aspect/area distributions."""
    _, _, w, h = sample_anchor_shape(image_w, image_h, spec, rng)
    x = int(rng.integers(0, image_w - w + 1))
    y = int(rng.integers(0, image_h - h + 1))
    return Rect(x, y, w, h)


# ---------------------------------------------------------------------------
# Irregular polygons
# ---------------------------------------------------------------------------

def gen_irregular_polygon(spec: PolygonSpec, rng) -> Polygon:
    """Walk around a circle with jittered angular steps and radii.

    Steps are 2*pi/n perturbed by +-irregularity*2*pi/n then renormalized
    to sum to exactly 2*pi; radii are Gaussian around avg_radius with
    sigma = spikiness*avg_radius, clipped to (0, 2*avg_radius].
    """
    n = spec.n
    base = 2.0 * math.pi / n
    jit = spec.irregularity * base
    steps = base + rng.uniform(-jit, jit, size=n)
    steps *= (2.0 * math.pi) / steps.sum()
    start = rng.uniform(0.0, 2.0 * math.pi)
    angles = start + np.concatenate(([0.0], np.cumsum(steps[:-1])))
    radii = rng.normal(spec.avg_radius, spec.spikiness * spec.avg_radius, size=n)
    radii = np.clip(radii, 1e-9, 2.0 * spec.avg_radius)
    cx, cy = spec.center
    xs = cx + radii * np.cos(angles)
    ys = cy + radii * np.sin(angles)
    return Polygon(tuple(zip(xs.tolist(), ys.tolist())))


def rasterize_polygon(poly: Polygon, bounds: Rect) -> np.ndarray:
    """Even-odd fill at pixel centers; alpha 1 inside, 0 outside.

    The returned mask has shape (bounds.h, bounds.w) with its origin at
    (bounds.x, bounds.y).
    """
    xs, ys = poly.as_arrays()
    if poly.shoelace_area() < 1e-9:
        raise RasterizationError("polygon has (near) zero area")
    if (
        xs.min() < bounds.x
        or ys.min() < bounds.y
        or xs.max() > bounds.x + bounds.w
        or ys.max() > bounds.y + bounds.h
    ):
        raise RasterizationError(f"polygon exceeds bounds {bounds}")
    return kernels.polygon_mask(xs, ys, bounds.x, bounds.y, bounds.h, bounds.w)
