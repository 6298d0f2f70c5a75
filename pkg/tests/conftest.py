import numpy as np
import pytest
from PIL import Image


def _gradient_image(size, seed):
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size]
    base = np.stack(
        [
            (xx * 255 / max(1, size - 1)),
            (yy * 255 / max(1, size - 1)),
            ((xx + yy) * 255 / max(1, 2 * size - 2)),
        ],
        axis=-1,
    )
    noise = rng.integers(-20, 21, size=base.shape)
    return np.clip(base + noise, 0, 255).astype(np.uint8)


@pytest.fixture(scope="session")
def source_pool(tmp_path_factory):
    """Six seeded 512x512 textured PNGs usable as backgrounds and crops."""
    pool = tmp_path_factory.mktemp("source_pool")
    for i in range(6):
        Image.fromarray(_gradient_image(512, seed=100 + i), "RGB").save(
            pool / f"src{i}.png"
        )
    return pool


@pytest.fixture(scope="session")
def instance_pool(tmp_path_factory):
    """Four RGBA cutouts: soft-edged ellipses of assorted sizes."""
    pool = tmp_path_factory.mktemp("instance_pool")
    rng = np.random.default_rng(9)
    for i, (w, h) in enumerate([(60, 40), (120, 90), (45, 80), (200, 150)]):
        yy, xx = np.mgrid[0:h, 0:w]
        d = ((xx - w / 2) / (w / 2)) ** 2 + ((yy - h / 2) / (h / 2)) ** 2
        alpha = np.clip((1.0 - d) * 4.0, 0.0, 1.0)
        rgb = rng.integers(0, 255, size=(h, w, 3), dtype=np.uint8)
        rgba = np.dstack([rgb, (alpha * 255).astype(np.uint8)])
        Image.fromarray(rgba, "RGBA").save(pool / f"cutout{i}.png")
    return pool


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
