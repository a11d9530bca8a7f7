"""Pixel-level transforms: noise, gamma, equalization, dropout, sharpen, blur, contrast.

These operate on the image plane only and never see a mask; the pipeline
verifies mask byte-equality around every pixel-level step.  All outputs
are clipped back into [0, 1] by the ImagePlane constructor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .raster import ImagePlane
from .rng import RandomStream

__all__ = [
    "WhiteNoiseParams",
    "PixelDropoutParams",
    "GammaParams",
    "FilterParams",
    "white_noise",
    "gamma_correct",
    "equalize_hist",
    "pixel_dropout",
    "sharpen",
    "blur",
    "adjust_contrast",
]

GAMMA_BOUNDS = (0.25, 4.0)


@dataclass(frozen=True)
class WhiteNoiseParams:
    """Noise standard deviation on the 0-255 intensity scale.

    The source text defines epsilon on byte intensities ("greater than or
    equal to 1"); it is divided by 255 before being added to the [0, 1]
    working representation.  ``epsilon == 0`` is admitted as an identity
    bypass for tests.
    """

    epsilon: float

    def __post_init__(self):
        if self.epsilon != 0.0 and self.epsilon < 1.0:
            raise ValueError("epsilon must be >= 1 (or exactly 0 to disable)")


@dataclass(frozen=True)
class PixelDropoutParams:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("dropout fraction must lie in [0, 1]")


@dataclass(frozen=True)
class GammaParams:
    gamma: float

    def __post_init__(self):
        if not GAMMA_BOUNDS[0] <= self.gamma <= GAMMA_BOUNDS[1]:
            raise ValueError(f"gamma must lie in [{GAMMA_BOUNDS[0]}, {GAMMA_BOUNDS[1]}]")


@dataclass(frozen=True)
class FilterParams:
    """Shared knobs of the convolution-style filters.

    ``blur_sigma`` drives both the blur op and the unsharp mask inside
    sharpen; ``sharpen_amount`` and ``contrast_factor`` belong to their
    respective ops.
    """

    blur_sigma: float = 1.0
    sharpen_amount: float = 1.0
    contrast_factor: float = 1.0

    def __post_init__(self):
        if self.blur_sigma <= 0:
            raise ValueError("blur sigma must be positive")
        if self.sharpen_amount < 0:
            raise ValueError("sharpen amount must be non-negative")
        if self.contrast_factor < 0:
            raise ValueError("contrast factor must be non-negative")


def white_noise(image: ImagePlane, params: WhiteNoiseParams, rng: RandomStream) -> ImagePlane:
    """Add i.i.d. Normal(0, (epsilon/255)^2) noise per sample-channel, then clip."""
    noise = rng.normal(image.data.shape) * (params.epsilon / 255.0)
    return ImagePlane(image.data + noise)


def gamma_correct(image: ImagePlane, params: GammaParams) -> ImagePlane:
    return ImagePlane(np.power(image.data, params.gamma))


def equalize_hist(image: ImagePlane) -> ImagePlane:
    """Global per-channel histogram equalization over 256 bins.

    Samples are binned by ``round(v * 255)``; output levels follow the
    cumulative histogram rescaled so the lowest occupied bin maps to 0 and
    the highest to 1.  A constant channel is left unchanged.
    """
    out = np.empty_like(image.data)
    total = image.data.shape[0] * image.data.shape[1]
    for c in range(image.channels):
        bins = np.floor(image.data[:, :, c] * 255.0 + 0.5).astype(np.int64)
        hist = np.bincount(bins.ravel(), minlength=256)
        cdf = np.cumsum(hist)
        low = cdf[np.flatnonzero(hist)[0]]  # cumulative count at the lowest occupied bin
        if low == total:
            out[:, :, c] = image.data[:, :, c]
        else:
            levels = (cdf - low) / float(total - low)
            out[:, :, c] = levels[bins]
    return ImagePlane(out)


def pixel_dropout(image: ImagePlane, params: PixelDropoutParams, rng: RandomStream) -> ImagePlane:
    """Zero each pixel location (all channels) independently with probability p."""
    drop = rng.uniform((image.height, image.width)) < params.p
    return ImagePlane(np.where(drop[:, :, None], 0.0, image.data))


def blur(image: ImagePlane, params: FilterParams) -> ImagePlane:
    """Gaussian blur, kernel truncated at 3*sigma and normalized, reflect border."""
    smoothed = gaussian_filter(image.data, sigma=(params.blur_sigma, params.blur_sigma, 0.0),
                               mode="reflect", truncate=3.0)
    return ImagePlane(smoothed)


def sharpen(image: ImagePlane, params: FilterParams) -> ImagePlane:
    """Unsharp mask: in + amount * (in - blur(in))."""
    smoothed = blur(image, params)
    return ImagePlane(image.data + params.sharpen_amount * (image.data - smoothed.data))


def adjust_contrast(image: ImagePlane, params: FilterParams) -> ImagePlane:
    """Scale deviation from the per-channel mean by the contrast factor."""
    mean = image.data.mean(axis=(0, 1), keepdims=True)
    return ImagePlane(mean + params.contrast_factor * (image.data - mean))
