"""Shared raster types, sampling primitives, and deterministic randomness.

Conventions used across the package:

* Images are 2-D numpy arrays in row-major (height, width) layout.
  ``GrayImage`` is float64, ``ByteImage`` is uint8 with values in [0, 255].
* All out-of-raster sampling clamps coordinates to the border pixel.
* Randomness flows through ``numpy.random.Generator`` instances backed by
  the published PCG64 generator, seeded via ``make_rng`` so that streams
  are reproducible across runs and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Type aliases for the two raster carriers. A GrayImage holds real values
# (float64), a ByteImage holds 8-bit levels; both are (height, width).
GrayImage = np.ndarray
ByteImage = np.ndarray

Rng = np.random.Generator


@dataclass(frozen=True)
class RescaleBounds:
    """Closed interval [low, high] used for linear byte rescaling."""

    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"rescale bounds require low < high, got ({self.low}, {self.high})")


@dataclass(frozen=True)
class FlowField:
    """Per-pixel displacement field: u horizontal, v vertical, pixels/frame."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if u.ndim != 2 or u.shape != v.shape:
            raise ValueError(f"flow components must be matching 2-D arrays, got {u.shape} and {v.shape}")
        if not (np.isfinite(u).all() and np.isfinite(v).all()):
            raise ValueError("flow field contains non-finite values")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape


def pixel_at(img: np.ndarray, x: int, y: int) -> float:
    """Value of the pixel at integer coordinates (x, y), row-major."""
    h, w = img.shape
    if not (0 <= x < w and 0 <= y < h):
        raise IndexError(f"pixel ({x}, {y}) outside {w}x{h} image")
    return float(img[y, x])


def bilinear_map(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of `img` at real coordinate arrays (xs, ys).

    Coordinates outside the raster clamp to the border pixel, so the result
    is always bounded by the min/max of the source pixels.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    xc = np.clip(xs, 0.0, float(w - 1))
    yc = np.clip(ys, 0.0, float(h - 1))
    x0 = np.floor(xc).astype(np.intp)
    y0 = np.floor(yc).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xc - x0
    fy = yc - y0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def bilinear_sample(img: np.ndarray, x: float, y: float) -> float:
    """Bilinear interpolation at a single real coordinate, clamped borders."""
    return float(bilinear_map(img, np.float64(x), np.float64(y)))


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with corner-aligned coordinate mapping.

    Identity when the output size equals the input size.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError(f"invalid output size {out_h}x{out_w}")
    in_h, in_w = img.shape
    if (in_h, in_w) == (out_h, out_w):
        return np.array(img, dtype=np.float64)
    xs = np.linspace(0.0, in_w - 1.0, out_w)
    ys = np.linspace(0.0, in_h - 1.0, out_h)
    gx, gy = np.meshgrid(xs, ys)
    return bilinear_map(img, gx, gy)


def to_gray(rgb: np.ndarray) -> GrayImage:
    """RGB (H, W, 3) to luma using the 0.299/0.587/0.114 weights."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) RGB array, got shape {rgb.shape}")
    return 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]


def make_rng(seed: int, stream: int = 0) -> Rng:
    """Deterministic PCG64 generator for (seed, stream).

    Distinct streams derived from one seed are statistically independent;
    the same (seed, stream) pair yields an identical sequence on every
    platform, which all reproducibility tests rely on.
    """
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(stream,))
    return np.random.Generator(np.random.PCG64(seq))


def rng_uniform(rng: Rng, n: int) -> int:
    """Uniform integer in [0, n), advancing the generator state."""
    if n < 1:
        raise ValueError(f"rng_uniform needs n >= 1, got {n}")
    return int(rng.integers(n))
