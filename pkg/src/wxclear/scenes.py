"""Procedural clean scenes for desk-scale experiments: smooth color
gradients, soft shapes, and band-limited texture. Deterministic per seed."""

import numpy as np
from scipy.ndimage import gaussian_filter


def procedural_scene(seed: int, h: int, w: int) -> np.ndarray:
    """An (H, W, 3) float32 image in [0, 1]."""
    rng = np.random.default_rng(seed)
    yy = np.linspace(0.0, 1.0, h)[:, None, None]
    xx = np.linspace(0.0, 1.0, w)[None, :, None]
    corners = rng.uniform(0.15, 0.85, size=(4, 3))
    img = (
        corners[0] * (1 - yy) * (1 - xx)
        + corners[1] * (1 - yy) * xx
        + corners[2] * yy * (1 - xx)
        + corners[3] * yy * xx
    )

    ys = np.arange(h)[:, None]
    xs = np.arange(w)[None, :]
    for _ in range(int(rng.integers(4, 9))):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        ry = rng.uniform(0.08, 0.3) * h
        rx = rng.uniform(0.08, 0.3) * w
        color = rng.uniform(0.05, 0.95, size=3)
        d2 = ((ys - cy) / ry) ** 2 + ((xs - cx) / rx) ** 2
        alpha = np.clip(1.5 * (1.0 - d2), 0.0, 1.0)[..., None]
        img = (1 - alpha) * img + alpha * color

    texture = gaussian_filter(rng.normal(size=(h, w)), sigma=1.5)
    scale = np.abs(texture).max() + 1e-9
    img = img + (0.05 * texture / scale)[..., None]
    return np.clip(img, 0.0, 1.0).astype(np.float32)
