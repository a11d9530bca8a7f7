"""Synthetic fundus-like samples for tests, smoke runs and benchmarks.

Not a physical model: just a circular field of view, a smooth reddish
background and a branching random-walk "vessel" tree that darkens the
photograph under the mask, so geometric and pixel transforms have
realistic structure to chew on.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .raster import BinaryMask, ImagePlane, ProbabilityMap, Sample
from .rng import RandomStream

__all__ = ["make_sample", "make_probability_map"]


def _vessel_tree(height: int, width: int, rng: RandomStream) -> np.ndarray:
    mask = np.zeros((height, width), dtype=np.uint8)
    cx, cy = width / 2.0, height / 2.0
    radius = 0.46 * min(width, height)
    branches = 8 + rng.integers(0, 5)
    for _ in range(branches):
        angle = rng.uniform() * 2.0 * np.pi
        x, y = cx, cy
        heading = angle
        steps = int(radius * (0.7 + 0.3 * rng.uniform()))
        thick = 1 + rng.integers(0, 2)
        for _ in range(steps):
            heading += 0.35 * rng.normal()
            x += np.cos(heading)
            y += np.sin(heading)
            if (x - cx) ** 2 + (y - cy) ** 2 > radius * radius:
                break
            xi, yi = int(round(x)), int(round(y))
            mask[max(0, yi - thick + 1):yi + thick, max(0, xi - thick + 1):xi + thick] = 1
    return mask


def make_sample(width: int, height: int, rng: RandomStream, channels: int = 3,
                with_fov: bool = True, id: str = "synthetic") -> Sample:
    """Build one synthetic sample; same stream, same sample, forever."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    radius = 0.48 * min(width, height)
    fov_arr = (((xx - cx) ** 2 + (yy - cy) ** 2) <= radius * radius).astype(np.uint8)

    texture = gaussian_filter(rng.normal((height, width)), sigma=max(4.0, min(width, height) / 24.0),
                              mode="reflect")
    texture = texture / (np.abs(texture).max() + 1e-12)
    base = 0.55 + 0.18 * texture - 0.15 * (((xx - cx) ** 2 + (yy - cy) ** 2) / (radius * radius))

    vessels = _vessel_tree(height, width, rng)

    img = np.zeros((height, width, channels), dtype=np.float64)
    channel_gain = (1.0, 0.55, 0.35)[:channels] if channels == 3 else (0.8,)
    for c, gain in enumerate(channel_gain):
        img[:, :, c] = np.clip(base * gain, 0.0, 1.0)
    img[vessels == 1] *= 0.45  # vessels read darker than the surround
    img *= fov_arr[:, :, None]

    return Sample(image=ImagePlane(img),
                  vessels=BinaryMask(vessels * fov_arr),
                  fov=BinaryMask(fov_arr) if with_fov else None,
                  id=id)


def make_probability_map(truth: BinaryMask, rng: RandomStream, noise: float = 0.15,
                         smear: float = 1.0) -> ProbabilityMap:
    """Noisy, slightly blurred score field that tracks the truth (AUC well above chance)."""
    scores = truth.data.astype(np.float64) * 0.75 + 0.12
    scores = gaussian_filter(scores, sigma=smear, mode="reflect")
    scores = scores + noise * rng.normal(truth.data.shape)
    return ProbabilityMap(np.clip(scores, 0.0, 1.0))
