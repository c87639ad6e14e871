"""Seeded lightweight augmentations for easy-pool samples.

Images are 2-D float64 arrays in [0, 1]. The three operations (Gaussian
blur, brightness shift, affine warp) are applied in that fixed order by
:func:`augment_sample`; every parameter is drawn from the spec ranges by
a generator seeded per entry, so augmentation is fully reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class AugmentationSpec:
    blur_sigma_range: tuple[float, float] = (0.0, 1.5)
    brightness_range: tuple[float, float] = (-0.15, 0.15)
    rotation_range_degrees: tuple[float, float] = (-10.0, 10.0)
    translation_range_pixels: tuple[float, float] = (-2.0, 2.0)

    def __post_init__(self) -> None:
        for name in (
            "blur_sigma_range",
            "brightness_range",
            "rotation_range_degrees",
            "translation_range_pixels",
        ):
            lo, hi = getattr(self, name)
            object.__setattr__(self, name, (float(lo), float(hi)))
            if lo > hi:
                raise ValueError(f"{name}: lo {lo} > hi {hi}")
        if self.blur_sigma_range[0] < 0.0:
            raise ValueError("blur sigma must be non-negative")


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Discrete Gaussian with radius ceil(3*sigma), normalized to sum 1."""
    radius = math.ceil(3.0 * sigma)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs**2) / (2.0 * sigma**2))
    return k / k.sum()


def _conv1d_reflect(image: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = len(kernel) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    padded = np.pad(image, pad, mode="reflect")
    out = np.zeros_like(image)
    for j, w in enumerate(kernel):
        if axis == 0:
            out += w * padded[j : j + image.shape[0], :]
        else:
            out += w * padded[:, j : j + image.shape[1]]
    return out


def gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with reflect padding; sigma=0 is the identity."""
    if sigma < 0.0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0.0:
        return image.copy()
    kernel = gaussian_kernel_1d(sigma)
    out = _conv1d_reflect(image, kernel, axis=0)
    out = _conv1d_reflect(out, kernel, axis=1)
    return np.clip(out, 0.0, 1.0)


def brightness_adjust(image: np.ndarray, delta: float) -> np.ndarray:
    return np.clip(image + delta, 0.0, 1.0)


def _reflect_index(idx: np.ndarray, n: int) -> np.ndarray:
    # Mirror without repeating the edge sample (period 2n-2), matching
    # numpy's "reflect" padding.
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * n - 2
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - idx, idx)


def affine(image: np.ndarray, rotation_degrees: float, dx: float, dy: float) -> np.ndarray:
    """Rotation about the image center plus translation, bilinear sampling.

    Inverse-mapped: each output pixel samples the input at the inverse
    transform, with reflected reads outside the frame. rotation=0, dx=1
    gives output(x, y) = input(x-1, y).
    """
    h, w = image.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    theta = math.radians(rotation_degrees)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    u = xs - dx - cx
    v = ys - dy - cy
    src_x = cos_t * u + sin_t * v + cx
    src_y = -sin_t * u + cos_t * v + cy

    x0 = np.floor(src_x).astype(np.int64)
    y0 = np.floor(src_y).astype(np.int64)
    fx = src_x - x0
    fy = src_y - y0
    x0r, x1r = _reflect_index(x0, w), _reflect_index(x0 + 1, w)
    y0r, y1r = _reflect_index(y0, h), _reflect_index(y0 + 1, h)
    out = (
        image[y0r, x0r] * (1 - fy) * (1 - fx)
        + image[y0r, x1r] * (1 - fy) * fx
        + image[y1r, x0r] * fy * (1 - fx)
        + image[y1r, x1r] * fy * fx
    )
    return np.clip(out, 0.0, 1.0)


def augment_pixels(image: np.ndarray, spec: AugmentationSpec, seed: int) -> np.ndarray:
    """Apply blur -> brightness -> affine with parameters drawn from ``seed``."""
    rng = np.random.default_rng(int(seed))
    sigma = rng.uniform(*spec.blur_sigma_range)
    delta = rng.uniform(*spec.brightness_range)
    theta = rng.uniform(*spec.rotation_range_degrees)
    dx = rng.uniform(*spec.translation_range_pixels)
    dy = rng.uniform(*spec.translation_range_pixels)
    out = gaussian_blur(image, sigma)
    out = brightness_adjust(out, delta)
    return affine(out, theta, dx, dy)


def augment_sample(sample, spec: AugmentationSpec, seed: int):
    """Augmented copy of a dataset sample; labels and metadata untouched."""
    return replace(sample, image=augment_pixels(sample.image, spec, seed))
