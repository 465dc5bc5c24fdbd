"""Synthetic weather degradations: additive rain streaks, alpha-composited
snow particles, and refractive raindrop blobs. Seeded and reproducible;
the clean input is never modified."""

import math
from dataclasses import dataclass, fields

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates

from .errors import ValidationError

KINDS = ("rain", "snow", "raindrop")


@dataclass(frozen=True)
class DegradationSpec:
    kind: str
    seed: int = 0
    density: float = 0.006          # streaks or particles per pixel
    streak_length: tuple = (8.0, 18.0)
    streak_angle: float = 75.0      # degrees from horizontal
    angle_jitter: float = 6.0
    streak_strength: float = 0.9
    particle_radius: tuple = (1.5, 3.2)
    particle_alpha: tuple = (0.55, 0.95)
    blob_count: int = 14
    blob_radius: tuple = (6.0, 13.0)
    refraction: float = 0.7

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown degradation kind {self.kind!r}")
        if self.density < 0:
            raise ValidationError("density must be >= 0")
        for name in ("streak_length", "particle_radius", "particle_alpha", "blob_radius"):
            lo, hi = getattr(self, name)
            object.__setattr__(self, name, (float(lo), float(hi)))
            if not 0 <= lo <= hi:
                raise ValidationError(f"{name} must be an increasing non-negative range")
        if self.blob_count < 0:
            raise ValidationError("blob_count must be >= 0")
        if not 0 <= self.refraction <= 1:
            raise ValidationError("refraction must be in [0, 1]")
        if self.streak_strength < 0:
            raise ValidationError("streak_strength must be >= 0")

    def replace(self, **kw) -> "DegradationSpec":
        current = {f.name: getattr(self, f.name) for f in fields(self)}
        unknown = set(kw) - set(current)
        if unknown:
            raise ValidationError(f"unknown degradation parameters: {sorted(unknown)}")
        current.update(kw)
        return DegradationSpec(**current)


@dataclass(frozen=True)
class PairedSample:
    degraded: np.ndarray
    clean: np.ndarray
    kind: str


def _splat_segment(layer, x0, y0, angle, length, intensity):
    """Accumulate an anti-aliased line segment by bilinear splatting."""
    h, w = layer.shape
    steps = max(2, int(length * 2))
    dx, dy = math.cos(angle), -math.sin(angle)
    for t in np.linspace(0.0, length, steps):
        px, py = x0 + t * dx, y0 + t * dy
        ix, iy = int(math.floor(px)), int(math.floor(py))
        fx, fy = px - ix, py - iy
        for oy, wy in ((0, 1 - fy), (1, fy)):
            for ox, wx in ((0, 1 - fx), (1, fx)):
                yy, xx = iy + oy, ix + ox
                if 0 <= yy < h and 0 <= xx < w:
                    layer[yy, xx] = max(layer[yy, xx], intensity * wy * wx)


def _rain(img, spec, rng):
    h, w = img.shape[:2]
    n = round(spec.density * h * w)
    if n == 0:
        return img.copy()
    layer = np.zeros((h, w), dtype=np.float64)
    for _ in range(n):
        x0 = rng.uniform(-5, w + 5)
        y0 = rng.uniform(-5, h + 5)
        length = rng.uniform(*spec.streak_length)
        angle = math.radians(spec.streak_angle + rng.normal(0.0, spec.angle_jitter))
        intensity = rng.uniform(0.55, 1.0) * spec.streak_strength
        _splat_segment(layer, x0, y0, angle, length, intensity)
    layer = gaussian_filter(layer, sigma=0.4)
    layer[layer < 2e-3] = 0.0  # trim blur tails so streaks stay compact
    return np.clip(img + layer[..., None].astype(img.dtype), 0.0, 1.0)


def _snow(img, spec, rng):
    h, w = img.shape[:2]
    n = round(spec.density * h * w)
    if n == 0:
        return img.copy()
    out = img.astype(np.float64, copy=True)
    ys = np.arange(h)[:, None]
    xs = np.arange(w)[None, :]
    for _ in range(n):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        r = rng.uniform(*spec.particle_radius)
        a0 = rng.uniform(*spec.particle_alpha)
        color = rng.uniform(0.88, 1.0)
        lo_y, hi_y = max(0, int(cy - r - 2)), min(h, int(cy + r + 3))
        lo_x, hi_x = max(0, int(cx - r - 2)), min(w, int(cx + r + 3))
        if lo_y >= hi_y or lo_x >= hi_x:
            continue
        d2 = ((ys[lo_y:hi_y] - cy) ** 2 + (xs[:, lo_x:hi_x] - cx) ** 2) / (r * r)
        alpha = a0 * np.clip(1.0 - d2, 0.0, 1.0)[..., None]
        region = out[lo_y:hi_y, lo_x:hi_x]
        out[lo_y:hi_y, lo_x:hi_x] = (1 - alpha) * region + alpha * color
    return np.clip(out, 0.0, 1.0).astype(img.dtype)


def _raindrop(img, spec, rng):
    if spec.blob_count == 0:
        return img.copy()
    h, w = img.shape[:2]
    out = img.astype(np.float64, copy=True)
    ys = np.arange(h)[:, None]
    xs = np.arange(w)[None, :]
    for _ in range(spec.blob_count):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        r = rng.uniform(*spec.blob_radius)
        d2 = (((ys - cy) ** 2 + (xs - cx) ** 2) / (r * r)).clip(max=4.0)
        m = np.clip(1.0 - d2, 0.0, 1.0)
        if m.max() <= 0:
            continue
        # lens-like pull toward the blob center, blur, and a bright veil
        shrink = 1.0 - spec.refraction * m
        src_y = cy + (ys - cy) * shrink
        src_x = cx + (xs - cx) * shrink
        warped = np.stack(
            [
                map_coordinates(out[..., c], [src_y, src_x], order=1, mode="reflect")
                for c in range(out.shape[2])
            ],
            axis=-1,
        )
        warped = gaussian_filter(warped, sigma=(1.6, 1.6, 0.0))
        mm = m[..., None]
        veil = np.clip(0.55 * warped + 0.45 * 0.92, 0.0, 1.0)
        out = (1 - mm) * out + mm * veil
    return np.clip(out, 0.0, 1.0).astype(img.dtype)


_SYNTHESIZERS = {"rain": _rain, "snow": _snow, "raindrop": _raindrop}


def synthesize_degradation(clean: np.ndarray, spec: DegradationSpec) -> PairedSample:
    """Apply the degradation described by `spec` to a copy of `clean`."""
    clean = np.asarray(clean)
    if clean.ndim != 3 or clean.shape[2] != 3:
        raise ValidationError(f"expected (H, W, 3) image, got {clean.shape}")
    if clean.min() < 0 or clean.max() > 1:
        raise ValidationError("clean image values must lie in [0, 1]")
    rng = np.random.default_rng(spec.seed)
    degraded = _SYNTHESIZERS[spec.kind](clean, spec, rng)
    return PairedSample(degraded=degraded, clean=clean.copy(), kind=spec.kind)
