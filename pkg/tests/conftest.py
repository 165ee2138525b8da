import numpy as np
import pytest


def deterministic_image(height: int, width: int, seed: int = 0) -> np.ndarray:
    """A reproducible uint8 RGB test image with gradients and texture."""
    rng = np.random.default_rng(seed)
    ys = np.arange(height)[:, None]
    xs = np.arange(width)[None, :]
    r = (ys * 255 / max(height - 1, 1)) * np.ones_like(xs)
    g = (xs * 255 / max(width - 1, 1)) * np.ones_like(ys)
    b = 127.5 + 127.5 * np.sin(2 * np.pi * (ys / 16 + xs / 23))
    img = np.stack([r, g, b], axis=2)
    img = img + rng.integers(-20, 21, size=img.shape)
    return np.clip(img, 0, 255).astype(np.uint8)


@pytest.fixture
def test_image():
    return deterministic_image(48, 64, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
