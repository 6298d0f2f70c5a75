"""Seeded, deterministic compositing primitives.

Images are (H, W, 3) uint8 numpy arrays; soft masks are (H, W) float64
arrays with values in [0, 1].  All randomness flows through explicit
``numpy.random.Generator`` arguments, so fixed seeds give byte-identical
outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from . import kernels


class BoundsError(ValueError):
    """A rect or paste region does not fit inside its host image."""


class ParameterError(ValueError):
    """An argument is outside its documented range."""


class EmptyChangeError(ValueError):
    """A paste whose mask has no support produces no change box."""


@dataclass(frozen=True)
class Rect:
    """Axis-aligned integer rect, top-left (x, y), size (w, h)."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise BoundsError(f"rect must have positive size, got {self}")


@dataclass
class Patch:
    """An RGB patch plus its soft coverage mask."""

    image: np.ndarray  # (h, w, 3) uint8
    mask: np.ndarray  # (h, w) float64 in [0, 1]

    def __post_init__(self):
        if self.image.shape[:2] != self.mask.shape:
            raise ParameterError(
                f"patch image {self.image.shape[:2]} and mask "
                f"{self.mask.shape} dimensions differ"
            )


def validate_image(img: np.ndarray) -> np.ndarray:
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ParameterError(f"expected (H, W, 3) uint8 image, got {img.shape} {img.dtype}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ParameterError("image must be at least 1x1")
    return img


def load_png(path) -> np.ndarray:
    """Read a PNG as an (H, W, 3) uint8 array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_png(img: np.ndarray, path) -> None:
    validate_image(img)
    Image.fromarray(img, mode="RGB").save(path, format="PNG")


def crop_rect(src: np.ndarray, r: Rect) -> Patch:
    """Cut an opaque rectangular patch out of ``src``."""
    validate_image(src)
    h, w = src.shape[:2]
    if r.x < 0 or r.y < 0 or r.x + r.w > w or r.y + r.h > h:
        raise BoundsError(f"{r} outside {w}x{h} image")
    return Patch(
        image=src[r.y : r.y + r.h, r.x : r.x + r.w].copy(),
        mask=np.ones((r.h, r.w), dtype=np.float64),
    )


def rotate_patch(p: Patch, angle: float) -> Patch:
    """Rotate a patch counterclockwise, resizing to the tight rotated box.

    Multiples of 90 degrees are exact pixel permutations; everything else
    is bilinear with alpha going to 0 outside the rotated support.
    """
    angle = float(angle) % 360.0
    if angle == 0.0:
        return Patch(p.image.copy(), p.mask.copy())
    if angle in (90.0, 180.0, 270.0):
        k = int(angle // 90)
        return Patch(np.rot90(p.image, k).copy(), np.rot90(p.mask, k).copy())
    img_f, alpha = kernels.rotate_bilinear(p.image.astype(np.float64), p.mask, angle)
    img = np.clip(np.rint(img_f), 0, 255).astype(np.uint8)
    return Patch(img, np.clip(alpha, 0.0, 1.0))


def feather_mask(m: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian-blur a mask's edges (clamp-to-edge borders)."""
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    m = np.asarray(m, dtype=np.float64)
    if sigma == 0:
        return m.copy()
    out = kernels.blur_separable(m, kernels.gaussian_taps(sigma))
    return np.clip(out, 0.0, 1.0)


def mask_support_bbox(mask: np.ndarray) -> Rect | None:
    """Tight bbox of alpha > 0, or None for an empty mask."""
    ys, xs = np.nonzero(mask > 0.0)
    if ys.size == 0:
        return None
    x0, x1 = int(xs.min()), int(xs.max())
    y0, y1 = int(ys.min()), int(ys.max())
    return Rect(x0, y0, x1 - x0 + 1, y1 - y0 + 1)


def composite(background: np.ndarray, p: Patch, at) -> tuple[np.ndarray, Rect]:
    """Alpha-blend a patch onto the background at top-left ``at``.

    Returns the composited image and the tight bbox (in background
    coordinates) of the pasted support, which is the ground-truth change
    region.  Pixels with alpha 0 stay byte-identical to the background.
    """
    validate_image(background)
    x, y = int(at[0]), int(at[1])
    sup = mask_support_bbox(p.mask)
    if sup is None:
        raise EmptyChangeError("patch mask has no support; no change produced")
    bh, bw = background.shape[:2]
    gx, gy = x + sup.x, y + sup.y
    if gx < 0 or gy < 0 or gx + sup.w > bw or gy + sup.h > bh:
        raise BoundsError(
            f"pasted support {sup.w}x{sup.h} at ({gx}, {gy}) exceeds "
            f"{bw}x{bh} background"
        )
    out = background.copy()
    sub_a = p.mask[sup.y : sup.y + sup.h, sup.x : sup.x + sup.w]
    sub_img = p.image[sup.y : sup.y + sup.h, sup.x : sup.x + sup.w]
    region = out[gy : gy + sup.h, gx : gx + sup.w]
    nz = sub_a > 0.0
    blended = (
        sub_a[:, :, None] * sub_img.astype(np.float64)
        + (1.0 - sub_a[:, :, None]) * region.astype(np.float64)
    )
    blended_u8 = np.clip(np.rint(blended), 0, 255).astype(np.uint8)
    region[nz] = blended_u8[nz]
    return out, Rect(gx, gy, sup.w, sup.h)


def add_gaussian_noise(img: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Additive zero-mean per-channel Gaussian noise, clamped to [0, 255]."""
    validate_image(img)
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img.copy()
    noise = rng.normal(0.0, sigma, size=img.shape)
    return np.clip(np.rint(img.astype(np.float64) + noise), 0, 255).astype(np.uint8)


def color_jitter(img: np.ndarray, per_channel_gain) -> np.ndarray:
    """Scale each channel by its gain (gains must lie in [0.5, 1.5])."""
    validate_image(img)
    gains = np.asarray(per_channel_gain, dtype=np.float64)
    if gains.shape != (3,):
        raise ParameterError("per_channel_gain must be a triple")
    if np.any(gains < 0.5) or np.any(gains > 1.5):
        raise ParameterError(f"gains must lie in [0.5, 1.5], got {gains}")
    out = img.astype(np.float64) * gains[None, None, :]
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)
