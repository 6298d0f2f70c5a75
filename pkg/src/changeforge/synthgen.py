"""Dataset factory: assembles annotated image pairs per generation
strategy, writes a manifest, and ingests datasets in the same format."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import imageops
from .codec import ChangeBox
from .imageops import Patch, Rect
from .shapes import AnchorSpec, PolygonSpec, gen_irregular_polygon, rasterize_polygon, sample_anchor_shape

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1
MAX_CHANGES_PER_PAIR = 5
PLACEMENT_RETRIES = 32

KIND_REGULAR = "regular_crop"
KIND_INSTANCE = "instance_cutout"
KIND_IRREGULAR = "irregular_crop"
CHANGE_KINDS = (KIND_REGULAR, KIND_INSTANCE, KIND_IRREGULAR)


class GenerationError(RuntimeError):
    pass


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class Restrictions:
    rotation: bool = True
    margin_blur_sigma: tuple | None = (0.8, 1.1)  # (low, high) or None for off
    noise: bool = True
    jitter: bool = True


@dataclass
class GenerationConfig:
    source_pool_dir: str = ""
    count: int = 1
    seed: int = 0
    strategy_tag: str = "custom"
    change_kinds: dict = field(default_factory=lambda: {KIND_REGULAR: 1.0})
    restrictions: Restrictions = field(default_factory=Restrictions)
    anchor: AnchorSpec = field(default_factory=AnchorSpec)
    polygon_n: int = 10
    polygon_irregularity: tuple = (0.4, 0.7)
    polygon_spikiness: tuple = (0.0, 0.15)
    instance_pool_dir: str | None = None
    image_size: int = 512
    noise_sigma: tuple = (2.0, 10.0)
    jitter_gain: tuple = (0.9, 1.1)
    changes_range: tuple = (1, MAX_CHANGES_PER_PAIR)

    def __post_init__(self):
        if self.count < 1:
            raise GenerationError("count must be >= 1")
        lo, hi = self.changes_range
        if not (1 <= lo <= hi <= MAX_CHANGES_PER_PAIR):
            raise GenerationError(
                f"changes_range must lie within [1, {MAX_CHANGES_PER_PAIR}]"
            )
        total = sum(self.change_kinds.values())
        if total <= 0:
            raise GenerationError("change_kinds weights must sum to a positive value")
        for kind in self.change_kinds:
            if kind not in CHANGE_KINDS:
                raise GenerationError(f"unknown change kind {kind!r}")
        self.change_kinds = {k: v / total for k, v in self.change_kinds.items()}
        if self.change_kinds.get(KIND_INSTANCE, 0) > 0 and not self.instance_pool_dir:
            raise GenerationError("instance_pool_dir required when instance_cutout is weighted")

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationConfig":
        d = dict(d)
        if "restrictions" in d and isinstance(d["restrictions"], dict):
            r = dict(d["restrictions"])
            if r.get("margin_blur_sigma") is not None:
                r["margin_blur_sigma"] = tuple(r["margin_blur_sigma"])
            d["restrictions"] = Restrictions(**r)
        if "anchor" in d and isinstance(d["anchor"], dict):
            a = dict(d["anchor"])
            if "aspect_ratios" in a:
                a["aspect_ratios"] = tuple(tuple(x) for x in a["aspect_ratios"])
            if "area_bins" in a:
                a["area_bins"] = tuple(tuple(x) for x in a["area_bins"])
            d["anchor"] = AnchorSpec(**a)
        for key in ("polygon_irregularity", "polygon_spikiness", "noise_sigma", "jitter_gain", "changes_range"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "GenerationConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        r = self.restrictions
        return {
            "source_pool_dir": self.source_pool_dir,
            "count": self.count,
            "seed": self.seed,
            "strategy_tag": self.strategy_tag,
            "change_kinds": dict(sorted(self.change_kinds.items())),
            "restrictions": {
                "rotation": r.rotation,
                "margin_blur_sigma": list(r.margin_blur_sigma) if r.margin_blur_sigma else None,
                "noise": r.noise,
                "jitter": r.jitter,
            },
            "anchor": {
                "aspect_ratios": [list(x) for x in self.anchor.aspect_ratios],
                "swap_probability": self.anchor.swap_probability,
                "area_bins": [list(x) for x in self.anchor.area_bins],
            },
            "polygon_n": self.polygon_n,
            "polygon_irregularity": list(self.polygon_irregularity),
            "polygon_spikiness": list(self.polygon_spikiness),
            "instance_pool_dir": self.instance_pool_dir,
            "image_size": self.image_size,
            "noise_sigma": list(self.noise_sigma),
            "jitter_gain": list(self.jitter_gain),
            "changes_range": list(self.changes_range),
        }

    def fingerprint(self) -> str:
        digest = hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        ).hexdigest()
        return digest[:16]


@dataclass
class ImagePairRecord:
    pair_id: str
    reference_path: str
    test_path: str
    boxes: list  # list of ChangeBox
    strategy_tag: str = ""


@dataclass
class Manifest:
    version: int
    config: dict
    fingerprint: str
    records: list


# ---------------------------------------------------------------------------
# Pools
# ---------------------------------------------------------------------------

def _list_images(pool_dir) -> list:
    exts = {".png", ".jpg", ".jpeg", ".bmp"}
    paths = sorted(
        p for p in Path(pool_dir).iterdir() if p.suffix.lower() in exts
    )
    if not paths:
        raise GenerationError(f"image pool {pool_dir} is empty")
    return paths


def _load_rgb_resized(path, size: int) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(
            im.convert("RGB").resize((size, size), Image.BILINEAR), dtype=np.uint8
        )


def _load_rgba_patch(path) -> Patch:
    """Read a pre-cut RGBA cutout as a patch (alpha channel as mask)."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGBA"), dtype=np.uint8)
    return Patch(
        image=np.ascontiguousarray(arr[:, :, :3]),
        mask=arr[:, :, 3].astype(np.float64) / 255.0,
    )


def _resize_patch(p: Patch, scale: float) -> Patch:
    h, w = p.mask.shape
    nw, nh = max(1, int(round(w * scale))), max(1, int(round(h * scale)))
    img = np.asarray(
        Image.fromarray(p.image, "RGB").resize((nw, nh), Image.BILINEAR), dtype=np.uint8
    )
    mask = np.asarray(
        Image.fromarray((p.mask * 255.0).astype(np.uint8), "L").resize(
            (nw, nh), Image.BILINEAR
        ),
        dtype=np.float64,
    ) / 255.0
    return Patch(image=img, mask=mask)


# ---------------------------------------------------------------------------
# Single-pair generation
# ---------------------------------------------------------------------------

def _pick_kind(cfg: GenerationConfig, rng) -> str:
    kinds = sorted(cfg.change_kinds)
    weights = np.array([cfg.change_kinds[k] for k in kinds])
    return kinds[int(rng.choice(len(kinds), p=weights))]


def _build_patch(cfg, kind, sources, instances, rng) -> Patch:
    size = cfg.image_size
    if kind == KIND_INSTANCE:
        p = _load_rgba_patch(instances[int(rng.integers(len(instances)))])
        h, w = p.mask.shape
        if w > size or h > size:  # rescale only when the cutout cannot fit
            p = _resize_patch(p, 0.9 * size / max(w, h))
        return p
    src = _load_rgb_resized(sources[int(rng.integers(len(sources)))], size)
    _, _, w, h = sample_anchor_shape(size, size, cfg.anchor, rng)
    if kind == KIND_REGULAR:
        x = int(rng.integers(0, size - w + 1))
        y = int(rng.integers(0, size - h + 1))
        return imageops.crop_rect(src, Rect(x, y, w, h))
    # irregular: polygon inscribed in the anchor-sampled region
    radius = min(w, h) / 2.0
    spec = PolygonSpec(
        avg_radius=radius,
        center=(0.0, 0.0),
        n=cfg.polygon_n,
        irregularity=rng.uniform(*cfg.polygon_irregularity),
        spikiness=rng.uniform(*cfg.polygon_spikiness),
    )
    poly = gen_irregular_polygon(spec, rng)
    bbox = poly.bbox()
    mask = rasterize_polygon(poly, bbox)
    if mask.max() == 0.0:
        raise GenerationError("degenerate polygon rasterized to nothing")
    if bbox.w > size or bbox.h > size:
        raise GenerationError("polygon larger than the image")
    x = int(rng.integers(0, size - bbox.w + 1))
    y = int(rng.integers(0, size - bbox.h + 1))
    crop = imageops.crop_rect(src, Rect(x, y, bbox.w, bbox.h))
    return Patch(image=crop.image, mask=mask)


def _area_fraction_ok(rect: Rect, size: int) -> bool:
    frac = (rect.w * rect.h) / float(size * size)
    return 0.005 <= frac < 0.5


def generate_pair(cfg: GenerationConfig, rng, pair_id: str = "pair") -> tuple:
    """Build one (reference, test, record) triple in memory.

    The reference is the chosen background; the test image carries 1..5
    pasted changes with the configured restrictions; boxes are the tight
    supports of the pasted (feathered) masks.
    """
    sources = _list_images(cfg.source_pool_dir)
    instances = (
        _list_images(cfg.instance_pool_dir) if cfg.instance_pool_dir else []
    )
    size = cfg.image_size
    background = _load_rgb_resized(sources[int(rng.integers(len(sources)))], size)

    test = background.copy()
    boxes = []
    lo, hi = cfg.changes_range
    n_changes = int(rng.integers(lo, hi + 1))
    for _ in range(n_changes):
        placed = False
        for _attempt in range(PLACEMENT_RETRIES):
            kind = _pick_kind(cfg, rng)
            try:
                patch = _build_patch(cfg, kind, sources, instances, rng)
                if cfg.restrictions.rotation:
                    patch = imageops.rotate_patch(patch, rng.uniform(0.0, 360.0))
                if cfg.restrictions.margin_blur_sigma is not None:
                    sigma = rng.uniform(*cfg.restrictions.margin_blur_sigma)
                    patch = Patch(patch.image, imageops.feather_mask(patch.mask, sigma))
                sup = imageops.mask_support_bbox(patch.mask)
                if sup is None:
                    continue
                if sup.w > size or sup.h > size:
                    continue
                x = int(rng.integers(-sup.x, size - sup.w - sup.x + 1))
                y = int(rng.integers(-sup.y, size - sup.h - sup.y + 1))
                candidate, rect = imageops.composite(test, patch, (x, y))
            except (imageops.BoundsError, imageops.EmptyChangeError, GenerationError):
                continue
            if kind != KIND_INSTANCE and not _area_fraction_ok(rect, size):
                continue  # rotation/blur can push the tight box out of the bins
            test = candidate
            boxes.append(
                ChangeBox(
                    cx=rect.x + rect.w / 2.0,
                    cy=rect.y + rect.h / 2.0,
                    w=float(rect.w),
                    h=float(rect.h),
                )
            )
            placed = True
            break
        if not placed:
            raise GenerationError(
                f"{pair_id}: placement failed after {PLACEMENT_RETRIES} retries"
            )

    reference = background
    if cfg.restrictions.noise or cfg.restrictions.jitter:
        noisy_side = int(rng.integers(2))  # 0 = reference, 1 = test
        img = reference if noisy_side == 0 else test
        if cfg.restrictions.noise:
            img = imageops.add_gaussian_noise(img, rng.uniform(*cfg.noise_sigma), rng)
        if cfg.restrictions.jitter:
            gains = rng.uniform(cfg.jitter_gain[0], cfg.jitter_gain[1], size=3)
            img = imageops.color_jitter(img, gains)
        if noisy_side == 0:
            reference = img
        else:
            test = img

    record = ImagePairRecord(
        pair_id=pair_id,
        reference_path=f"{pair_id}_ref.png",
        test_path=f"{pair_id}_test.png",
        boxes=boxes,
        strategy_tag=cfg.strategy_tag,
    )
    return reference, test, record


# ---------------------------------------------------------------------------
# Dataset-level generation and loading
# ---------------------------------------------------------------------------

def _pair_rng(seed: int, pair_index: int, attempt: int = 0) -> np.random.Generator:
    # per-pair derived seed: reproducible regardless of scheduling
    return np.random.default_rng(np.random.SeedSequence([seed, pair_index, attempt]))


def generate_dataset(cfg: GenerationConfig, out_dir, retry_budget: int = 8) -> Manifest:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(cfg.count):
        pair_id = f"{cfg.strategy_tag}_{i:06d}"
        last_err = None
        for attempt in range(retry_budget):
            rng = _pair_rng(cfg.seed, i, attempt)
            try:
                reference, test, record = generate_pair(cfg, rng, pair_id)
                break
            except GenerationError as e:
                last_err = e
                log.warning("pair %s attempt %d failed: %s", pair_id, attempt, e)
        else:
            raise GenerationError(
                f"pair {pair_id} failed {retry_budget} attempts: {last_err}"
            )
        imageops.save_png(reference, out / record.reference_path)
        imageops.save_png(test, out / record.test_path)
        records.append(record)
    manifest = Manifest(
        version=MANIFEST_VERSION,
        config=cfg.to_dict(),
        fingerprint=cfg.fingerprint(),
        records=records,
    )
    write_manifest(manifest, out / "manifest.json")
    return manifest


def write_manifest(manifest: Manifest, path) -> None:
    doc = {
        "version": manifest.version,
        "config": manifest.config,
        "fingerprint": manifest.fingerprint,
        "records": [
            {
                "pair_id": r.pair_id,
                "reference_path": r.reference_path,
                "test_path": r.test_path,
                "strategy_tag": r.strategy_tag,
                "boxes": [
                    {"cx": b.cx, "cy": b.cy, "w": b.w, "h": b.h} for b in r.boxes
                ],
            }
            for r in manifest.records
        ],
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def load_dataset(manifest_path) -> list:
    """Load and validate records; paths resolve relative to the manifest."""
    manifest_path = Path(manifest_path)
    try:
        with open(manifest_path) as f:
            doc = json.load(f)
    except FileNotFoundError:
        raise ManifestError(f"manifest {manifest_path} does not exist")
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest {manifest_path} is not valid JSON: {e}")
    if not isinstance(doc, dict) or "records" not in doc:
        raise ManifestError(f"manifest {manifest_path} has no 'records' field")
    base = manifest_path.parent
    records = []
    for raw in doc["records"]:
        try:
            pair_id = raw["pair_id"]
            record = ImagePairRecord(
                pair_id=pair_id,
                reference_path=raw["reference_path"],
                test_path=raw["test_path"],
                strategy_tag=raw.get("strategy_tag", ""),
                boxes=[
                    ChangeBox(cx=float(b["cx"]), cy=float(b["cy"]),
                              w=float(b["w"]), h=float(b["h"]))
                    for b in raw["boxes"]
                ],
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ManifestError(
                f"record {raw.get('pair_id', '<unknown>')!r} is malformed: {e}"
            )
        dims = []
        for rel in (record.reference_path, record.test_path):
            p = base / rel
            if not p.exists():
                raise ManifestError(f"record {pair_id!r}: missing image {rel}")
            with Image.open(p) as im:
                dims.append(im.size)
        if dims[0] != dims[1]:
            raise ManifestError(
                f"record {pair_id!r}: reference {dims[0]} and test {dims[1]} "
                "dimensions differ"
            )
        records.append(record)
    return records
