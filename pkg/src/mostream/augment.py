"""Crop/flip augmentation geometry and its application to input volumes.

Training draws a random multi-scale crop (side lengths are fractions of
the short frame side, positioned at one of the four corners or the
center, flipped with probability 1/2). Testing enumerates the fixed
ten-crop set: five positions plus their horizontal mirrors. Crops are
resized to a square network input with bilinear interpolation.

Flipping a volume mirrors raw pixels on every channel; orientation and
x-displacement values are deliberately not remapped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import Rng, rng_uniform
from .volume import InputVolume

DEFAULT_OUT_SIDE = 224

# {256, 224, 192, 168} / 256, expressed as fractions of the short side so
# the same geometry applies at any frame scale.
DEFAULT_SCALE_FRACTIONS = (1.0, 0.875, 0.75, 0.65625)


@dataclass(frozen=True)
class CropSpec:
    x: int
    y: int
    crop_w: int
    crop_h: int
    flip: bool = False
    out_side: int = DEFAULT_OUT_SIDE

    def __post_init__(self):
        if self.crop_w < 1 or self.crop_h < 1 or self.out_side < 1:
            raise ValueError("crop dimensions and out_side must be >= 1")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"crop origin must be non-negative, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class ScaleSet:
    fractions: tuple[float, ...] = DEFAULT_SCALE_FRACTIONS

    def __post_init__(self):
        if not self.fractions:
            raise ValueError("scale set must not be empty")
        if any(not 0.0 < f <= 1.0 for f in self.fractions):
            raise ValueError(f"scale fractions must lie in (0, 1], got {self.fractions}")


def five_crops(w: int, h: int, crop_w: int, crop_h: int, out_side: int = DEFAULT_OUT_SIDE) -> list[CropSpec]:
    """Four corner crops plus the centered crop, unflipped."""
    if crop_w > w or crop_h > h:
        raise ValueError(f"crop {crop_w}x{crop_h} larger than source {w}x{h}")
    dx = w - crop_w
    dy = h - crop_h
    positions = [(0, 0), (dx, 0), (0, dy), (dx, dy), (dx // 2, dy // 2)]
    return [CropSpec(x, y, crop_w, crop_h, False, out_side) for x, y in positions]


def ten_crops(w: int, h: int, crop_w: int, crop_h: int, out_side: int = DEFAULT_OUT_SIDE) -> list[CropSpec]:
    """five_crops followed by the same five with horizontal flip."""
    base = five_crops(w, h, crop_w, crop_h, out_side)
    flipped = [CropSpec(c.x, c.y, c.crop_w, c.crop_h, True, out_side) for c in base]
    return base + flipped


def random_multiscale_crop(
    w: int,
    h: int,
    scales: ScaleSet = ScaleSet(),
    rng: Rng = None,
    out_side: int = DEFAULT_OUT_SIDE,
) -> CropSpec:
    """Random crop: independent width/height fractions of the short side,
    position among the five canonical crops, flip with probability 1/2."""
    if rng is None:
        raise ValueError("random_multiscale_crop requires an rng")
    base = min(w, h)
    fractions = scales.fractions
    crop_w = int(np.floor(fractions[rng_uniform(rng, len(fractions))] * base + 0.5))
    crop_h = int(np.floor(fractions[rng_uniform(rng, len(fractions))] * base + 0.5))
    crop_w = max(1, crop_w)
    crop_h = max(1, crop_h)
    position = five_crops(w, h, crop_w, crop_h, out_side)[rng_uniform(rng, 5)]
    flip = rng_uniform(rng, 2) == 1
    return CropSpec(position.x, position.y, crop_w, crop_h, flip, out_side)


def _resize_volume(vol, out_h, out_w):
    c, in_h, in_w = vol.shape
    if (in_h, in_w) == (out_h, out_w):
        return vol.copy()
    xs = np.linspace(0.0, in_w - 1.0, out_w)
    ys = np.linspace(0.0, in_h - 1.0, out_h)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    fx = xs - x0
    fy = ys - y0
    top = vol[:, y0[:, None], x0[None, :]] * (1.0 - fx) + vol[:, y0[:, None], x1[None, :]] * fx
    bot = vol[:, y1[:, None], x0[None, :]] * (1.0 - fx) + vol[:, y1[:, None], x1[None, :]] * fx
    return top * (1.0 - fy[:, None]) + bot * fy[:, None]


def apply_crop(volume: InputVolume, spec: CropSpec) -> InputVolume:
    """Crop, optionally mirror, and resize a volume to out_side x out_side."""
    volume = np.asarray(volume, dtype=np.float64)
    if volume.ndim != 3:
        raise ValueError(f"expected (C, H, W) volume, got shape {volume.shape}")
    _, h, w = volume.shape
    if spec.x + spec.crop_w > w or spec.y + spec.crop_h > h:
        raise ValueError(
            f"crop {spec.crop_w}x{spec.crop_h} at ({spec.x}, {spec.y}) exceeds {w}x{h} volume"
        )
    window = volume[:, spec.y : spec.y + spec.crop_h, spec.x : spec.x + spec.crop_w]
    if spec.flip:
        window = window[:, :, ::-1]
    return _resize_volume(window, spec.out_side, spec.out_side)
