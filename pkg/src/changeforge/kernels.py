"""Hot numeric kernels with numba-jitted and pure-numpy implementations.

Every kernel exists in two variants: a ``_np``-suffixed vectorized numpy
version and (when numba is importable) an ``_nb``-suffixed jitted version.
The public names dispatch to the jitted variant unless the environment
variable ``CHANGEFORGE_NO_NUMBA`` is set to a truthy value, in which case
the numpy path is used everywhere.  ``benchmarks/bench_kernels.py`` times
the two paths against each other.
"""

from __future__ import annotations

import math
import os

import numpy as np
from scipy.ndimage import correlate1d


def _numba_disabled() -> bool:
    return os.environ.get("CHANGEFORGE_NO_NUMBA", "").strip().lower() in (
        "1",
        "true",
        "yes",
        "on",
    )


NUMBA_ENABLED = False
if not _numba_disabled():
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False

if not NUMBA_ENABLED:

    def njit(*args, **kwargs):  # type: ignore[misc]
        """No-op decorator stand-in when numba is unavailable/disabled."""

        def wrap(fn):
            return fn

        if len(args) == 1 and callable(args[0]):
            return args[0]
        return wrap


# ---------------------------------------------------------------------------
# Bilinear rotation
# ---------------------------------------------------------------------------

def _rotate_bilinear_np(img, alpha, cos_t, sin_t, out_h, out_w):
    h, w = alpha.shape
    scx, scy = w / 2.0, h / 2.0
    ocx, ocy = out_w / 2.0, out_h / 2.0

    oy, ox = np.mgrid[0:out_h, 0:out_w]
    dx = (ox + 0.5) - ocx
    dy = (oy + 0.5) - ocy
    # inverse rotation back into source coordinates
    sx = scx + cos_t * dx + sin_t * dy - 0.5
    sy = scy - sin_t * dx + cos_t * dy - 0.5

    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = sx - x0
    fy = sy - y0

    pm = img * alpha[:, :, None]  # premultiplied, so out-of-support reads are 0

    def tap(yy, xx):
        inside = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        yc = np.clip(yy, 0, h - 1)
        xc = np.clip(xx, 0, w - 1)
        a = np.where(inside, alpha[yc, xc], 0.0)
        c = np.where(inside[:, :, None], pm[yc, xc], 0.0)
        return a, c

    a00, c00 = tap(y0, x0)
    a01, c01 = tap(y0, x0 + 1)
    a10, c10 = tap(y0 + 1, x0)
    a11, c11 = tap(y0 + 1, x0 + 1)

    w00 = (1.0 - fy) * (1.0 - fx)
    w01 = (1.0 - fy) * fx
    w10 = fy * (1.0 - fx)
    w11 = fy * fx

    out_a = w00 * a00 + w01 * a01 + w10 * a10 + w11 * a11
    out_c = (
        w00[:, :, None] * c00
        + w01[:, :, None] * c01
        + w10[:, :, None] * c10
        + w11[:, :, None] * c11
    )
    np.clip(out_a, 0.0, 1.0, out=out_a)
    safe = np.maximum(out_a, 1e-12)
    out_img = out_c / safe[:, :, None]
    out_img[out_a <= 0.0] = 0.0
    return out_img, out_a


@njit(cache=True)
def _rotate_bilinear_nb(img, alpha, cos_t, sin_t, out_h, out_w):
    h, w = alpha.shape
    scx, scy = w / 2.0, h / 2.0
    ocx, ocy = out_w / 2.0, out_h / 2.0
    out_img = np.zeros((out_h, out_w, 3), dtype=np.float64)
    out_a = np.zeros((out_h, out_w), dtype=np.float64)
    for oy in range(out_h):
        for ox in range(out_w):
            dx = (ox + 0.5) - ocx
            dy = (oy + 0.5) - ocy
            sx = scx + cos_t * dx + sin_t * dy - 0.5
            sy = scy - sin_t * dx + cos_t * dy - 0.5
            x0 = int(math.floor(sx))
            y0 = int(math.floor(sy))
            fx = sx - x0
            fy = sy - y0
            acc_a = 0.0
            acc_r = 0.0
            acc_g = 0.0
            acc_b = 0.0
            for dyi in range(2):
                for dxi in range(2):
                    yy = y0 + dyi
                    xx = x0 + dxi
                    if yy < 0 or yy >= h or xx < 0 or xx >= w:
                        continue
                    wgt = (fy if dyi == 1 else 1.0 - fy) * (
                        fx if dxi == 1 else 1.0 - fx
                    )
                    a = alpha[yy, xx]
                    acc_a += wgt * a
                    acc_r += wgt * a * img[yy, xx, 0]
                    acc_g += wgt * a * img[yy, xx, 1]
                    acc_b += wgt * a * img[yy, xx, 2]
            if acc_a > 1.0:
                acc_a = 1.0
            out_a[oy, ox] = acc_a
            if acc_a > 0.0:
                safe = acc_a if acc_a > 1e-12 else 1e-12
                out_img[oy, ox, 0] = acc_r / safe
                out_img[oy, ox, 1] = acc_g / safe
                out_img[oy, ox, 2] = acc_b / safe
    return out_img, out_a


def rotate_bilinear(img, alpha, angle_deg):
    """Rotate an (image, alpha) pair by ``angle_deg`` counterclockwise.

    Returns float64 arrays sized to the rotated tight bounding box; alpha
    is 0 outside the rotated support.
    """
    h, w = alpha.shape
    theta = math.radians(angle_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    out_w = int(math.ceil(abs(cos_t) * w + abs(sin_t) * h - 1e-9))
    out_h = int(math.ceil(abs(sin_t) * w + abs(cos_t) * h - 1e-9))
    img = np.ascontiguousarray(img, dtype=np.float64)
    alpha = np.ascontiguousarray(alpha, dtype=np.float64)
    if NUMBA_ENABLED:
        return _rotate_bilinear_nb(img, alpha, cos_t, sin_t, out_h, out_w)
    return _rotate_bilinear_np(img, alpha, cos_t, sin_t, out_h, out_w)


# ---------------------------------------------------------------------------
# Separable Gaussian blur (clamp-to-edge) for mask feathering
# ---------------------------------------------------------------------------

def gaussian_taps(sigma):
    """Normalized 1-D Gaussian kernel with radius ceil(3*sigma)."""
    radius = int(math.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = np.exp(-(xs**2) / (2.0 * sigma * sigma))
    return taps / taps.sum()


def _blur_sep_np(a, taps):
    out = correlate1d(a, taps, axis=0, mode="nearest")
    out = correlate1d(out, taps, axis=1, mode="nearest")
    return out


@njit(cache=True)
def _blur_sep_nb(a, taps):
    h, w = a.shape
    k = taps.shape[0]
    r = k // 2
    tmp = np.empty((h, w), dtype=np.float64)
    out = np.empty((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i in range(k):
                yy = y + i - r
                if yy < 0:
                    yy = 0
                elif yy >= h:
                    yy = h - 1
                acc += taps[i] * a[yy, x]
            tmp[y, x] = acc
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i in range(k):
                xx = x + i - r
                if xx < 0:
                    xx = 0
                elif xx >= w:
                    xx = w - 1
                acc += taps[i] * tmp[y, xx]
            out[y, x] = acc
    return out


def blur_separable(a, taps):
    a = np.ascontiguousarray(a, dtype=np.float64)
    taps = np.ascontiguousarray(taps, dtype=np.float64)
    if NUMBA_ENABLED:
        return _blur_sep_nb(a, taps)
    return _blur_sep_np(a, taps)


# ---------------------------------------------------------------------------
# Polygon rasterization (even-odd rule at pixel centers)
# ---------------------------------------------------------------------------

def _polygon_mask_np(xs, ys, x0, y0, h, w):
    py, px = np.mgrid[0:h, 0:w]
    cx = x0 + px + 0.5
    cy = y0 + py + 0.5
    inside = np.zeros((h, w), dtype=bool)
    n = xs.shape[0]
    for i in range(n):
        x1, y1 = xs[i], ys[i]
        x2, y2 = xs[(i + 1) % n], ys[(i + 1) % n]
        crosses = (y1 > cy) != (y2 > cy)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (cy - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (cx < xint)
    return inside.astype(np.float64)


@njit(cache=True)
def _polygon_mask_nb(xs, ys, x0, y0, h, w):
    n = xs.shape[0]
    out = np.zeros((h, w), dtype=np.float64)
    for py in range(h):
        cy = y0 + py + 0.5
        for px in range(w):
            cx = x0 + px + 0.5
            inside = False
            for i in range(n):
                x1 = xs[i]
                y1 = ys[i]
                j = i + 1
                if j == n:
                    j = 0
                x2 = xs[j]
                y2 = ys[j]
                if (y1 > cy) != (y2 > cy):
                    xint = x1 + (cy - y1) * (x2 - x1) / (y2 - y1)
                    if cx < xint:
                        inside = not inside
            if inside:
                out[py, px] = 1.0
    return out


def polygon_mask(xs, ys, x0, y0, h, w):
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    if NUMBA_ENABLED:
        return _polygon_mask_nb(xs, ys, float(x0), float(y0), h, w)
    return _polygon_mask_np(xs, ys, float(x0), float(y0), h, w)


# ---------------------------------------------------------------------------
# Gaussian heatmap splatting (max-merge)
# ---------------------------------------------------------------------------

def _splat_np(hm, pxs, pys, sigmas):
    size = hm.shape[0]
    for px, py, sigma in zip(pxs, pys, sigmas):
        r = int(math.ceil(3.0 * sigma))
        xlo, xhi = max(0, px - r), min(size - 1, px + r)
        ylo, yhi = max(0, py - r), min(size - 1, py + r)
        yy, xx = np.mgrid[ylo : yhi + 1, xlo : xhi + 1]
        val = np.exp(
            -((xx - px) ** 2 + (yy - py) ** 2) / (2.0 * sigma * sigma)
        )
        region = hm[ylo : yhi + 1, xlo : xhi + 1]
        np.maximum(region, val, out=region)
    return hm


@njit(cache=True)
def _splat_nb(hm, pxs, pys, sigmas):
    size = hm.shape[0]
    for k in range(pxs.shape[0]):
        px = pxs[k]
        py = pys[k]
        sigma = sigmas[k]
        r = int(math.ceil(3.0 * sigma))
        for yy in range(max(0, py - r), min(size - 1, py + r) + 1):
            for xx in range(max(0, px - r), min(size - 1, px + r) + 1):
                d2 = (xx - px) ** 2 + (yy - py) ** 2
                val = math.exp(-d2 / (2.0 * sigma * sigma))
                if val > hm[yy, xx]:
                    hm[yy, xx] = val
    return hm


def splat_gaussians(hm, pxs, pys, sigmas):
    """Max-merge isotropic Gaussians (value 1 at the peak cell) into hm."""
    pxs = np.ascontiguousarray(pxs, dtype=np.int64)
    pys = np.ascontiguousarray(pys, dtype=np.int64)
    sigmas = np.ascontiguousarray(sigmas, dtype=np.float64)
    if NUMBA_ENABLED:
        return _splat_nb(hm, pxs, pys, sigmas)
    return _splat_np(hm, pxs, pys, sigmas)


# ---------------------------------------------------------------------------
# Local-maximum peak mask
# ---------------------------------------------------------------------------

def _local_peaks_np(hm, threshold):
    padded = np.pad(hm, 1, mode="constant", constant_values=-np.inf)
    neigh = np.full_like(hm, -np.inf)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            shifted = padded[1 + dy : 1 + dy + hm.shape[0], 1 + dx : 1 + dx + hm.shape[1]]
            neigh = np.maximum(neigh, shifted)
    return (hm >= neigh) & (hm > threshold)


@njit(cache=True)
def _local_peaks_nb(hm, threshold):
    h, w = hm.shape
    out = np.zeros((h, w), dtype=np.bool_)
    for y in range(h):
        for x in range(w):
            v = hm[y, x]
            if v <= threshold:
                continue
            is_peak = True
            for dy in range(-1, 2):
                for dx in range(-1, 2):
                    if dy == 0 and dx == 0:
                        continue
                    yy = y + dy
                    xx = x + dx
                    if 0 <= yy < h and 0 <= xx < w and hm[yy, xx] > v:
                        is_peak = False
                        break
                if not is_peak:
                    break
            out[y, x] = is_peak
    return out


def local_peaks(hm, threshold):
    hm = np.ascontiguousarray(hm, dtype=np.float64)
    if NUMBA_ENABLED:
        return _local_peaks_nb(hm, float(threshold))
    return _local_peaks_np(hm, float(threshold))


# ---------------------------------------------------------------------------
# Focal-variant heatmap loss and its gradient
# ---------------------------------------------------------------------------

def _focal_np(y, g, alpha, beta):
    pos = g == 1.0
    n_pos = int(pos.sum())
    pos_terms = np.where(pos, (1.0 - y) ** alpha * np.log(y), 0.0)
    neg_terms = np.where(
        pos, 0.0, (1.0 - g) ** beta * y**alpha * np.log(1.0 - y)
    )
    total = -(pos_terms.sum() + neg_terms.sum())
    return total, n_pos


@njit(cache=True)
def _focal_nb(y, g, alpha, beta):
    h, w = y.shape
    total = 0.0
    n_pos = 0
    for i in range(h):
        for j in range(w):
            yy = y[i, j]
            gg = g[i, j]
            if gg == 1.0:
                n_pos += 1
                total += (1.0 - yy) ** alpha * math.log(yy)
            else:
                total += (1.0 - gg) ** beta * yy**alpha * math.log(1.0 - yy)
    return -total, n_pos


def focal_sum(y, g, alpha, beta):
    """Unnormalized focal-variant loss sum and the count of G==1 cells."""
    y = np.ascontiguousarray(y, dtype=np.float64)
    g = np.ascontiguousarray(g, dtype=np.float64)
    if NUMBA_ENABLED:
        return _focal_nb(y, g, float(alpha), float(beta))
    return _focal_np(y, g, float(alpha), float(beta))


def _focal_grad_np(y, g, alpha, beta):
    pos = g == 1.0
    grad_pos = -(
        -alpha * (1.0 - y) ** (alpha - 1.0) * np.log(y) + (1.0 - y) ** alpha / y
    )
    grad_neg = -(
        (1.0 - g) ** beta
        * (alpha * y ** (alpha - 1.0) * np.log(1.0 - y) - y**alpha / (1.0 - y))
    )
    return np.where(pos, grad_pos, grad_neg)


@njit(cache=True)
def _focal_grad_nb(y, g, alpha, beta):
    h, w = y.shape
    out = np.empty((h, w), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            yy = y[i, j]
            gg = g[i, j]
            if gg == 1.0:
                out[i, j] = -(
                    -alpha * (1.0 - yy) ** (alpha - 1.0) * math.log(yy)
                    + (1.0 - yy) ** alpha / yy
                )
            else:
                out[i, j] = -(
                    (1.0 - gg) ** beta
                    * (
                        alpha * yy ** (alpha - 1.0) * math.log(1.0 - yy)
                        - yy**alpha / (1.0 - yy)
                    )
                )
    return out


def focal_grad(y, g, alpha, beta):
    """d(focal sum)/dY, before the -1/N normalization applied by the caller."""
    y = np.ascontiguousarray(y, dtype=np.float64)
    g = np.ascontiguousarray(g, dtype=np.float64)
    if NUMBA_ENABLED:
        return _focal_grad_nb(y, g, float(alpha), float(beta))
    return _focal_grad_np(y, g, float(alpha), float(beta))


# Registry for the benchmark: public name -> {"numpy": fn, "numba": fn|None}
IMPLEMENTATIONS = {
    "rotate_bilinear": {
        "numpy": _rotate_bilinear_np,
        "numba": _rotate_bilinear_nb if NUMBA_ENABLED else None,
    },
    "blur_separable": {
        "numpy": _blur_sep_np,
        "numba": _blur_sep_nb if NUMBA_ENABLED else None,
    },
    "polygon_mask": {
        "numpy": _polygon_mask_np,
        "numba": _polygon_mask_nb if NUMBA_ENABLED else None,
    },
    "splat_gaussians": {
        "numpy": _splat_np,
        "numba": _splat_nb if NUMBA_ENABLED else None,
    },
    "local_peaks": {
        "numpy": _local_peaks_np,
        "numba": _local_peaks_nb if NUMBA_ENABLED else None,
    },
    "focal_sum": {
        "numpy": _focal_np,
        "numba": _focal_nb if NUMBA_ENABLED else None,
    },
    "focal_grad": {
        "numpy": _focal_grad_np,
        "numba": _focal_grad_nb if NUMBA_ENABLED else None,
    },
}
