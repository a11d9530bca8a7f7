"""Affine-family transforms: rotation, flipping, zoom out, random crop, shift, shear.

Each op builds one coordinate map and warps all planes of the sample
through it (see ``warp``).  Canvas size is preserved everywhere except
``random_crop``, which returns exactly the requested square.  Rotations
by multiples of 90 degrees take a lossless permutation path when the
geometry allows it (any multiple of 180, or a square raster).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .raster import BinaryMask, ImagePlane, Sample
from .rng import RandomStream
from .warp import identity_map, warp_sample

__all__ = [
    "AffineParams",
    "rotate",
    "flip",
    "zoom_out",
    "random_crop",
    "shift",
    "shear",
    "rotation_map",
    "flip_map",
    "zoom_out_map",
    "crop_map",
    "shift_map",
    "shear_map",
]

FLIP_AXES = ("horizontal", "vertical", "both", "none")
SHEAR_LIMIT = 0.5


@dataclass(frozen=True)
class AffineParams:
    """Validated bundle of affine parameters as they appear in plans."""

    angle: float = 0.0
    flip_axis: str = "none"
    zoom_factor: float = 1.0
    crop_size: int | None = None
    crop_offset: tuple[int, int] | None = None
    shift_px: tuple[int, int] = (0, 0)
    shear_factor: float = 0.0

    def validate(self, width: int, height: int) -> None:
        if not math.isfinite(self.angle):
            raise ValueError("rotation angle must be finite")
        if self.flip_axis not in FLIP_AXES:
            raise ValueError(f"flip axis must be one of {FLIP_AXES}")
        if not 0.0 < self.zoom_factor <= 1.0:
            raise ValueError("zoom-out factor must lie in (0, 1]")
        if abs(self.shear_factor) > SHEAR_LIMIT:
            raise ValueError(f"shear factor must lie in [-{SHEAR_LIMIT}, {SHEAR_LIMIT}]")
        if self.crop_size is not None:
            if not 0 < self.crop_size <= min(width, height):
                raise ValueError("crop size must fit inside the raster")
            if self.crop_offset is not None:
                x0, y0 = self.crop_offset
                if not (0 <= x0 <= width - self.crop_size and 0 <= y0 <= height - self.crop_size):
                    raise ValueError("crop window must lie fully inside the raster")
        if abs(self.shift_px[0]) >= width or abs(self.shift_px[1]) >= height:
            raise ValueError("shift magnitude must be smaller than the raster")


def _center(height: int, width: int) -> tuple[float, float]:
    return (width - 1) / 2.0, (height - 1) / 2.0


def rotation_map(height: int, width: int, angle_deg: float) -> np.ndarray:
    """Backward map for rotation about the raster center, canvas preserved."""
    theta = math.radians(angle_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    cx, cy = _center(height, width)
    m = identity_map(height, width)
    dx = m[:, :, 0] - cx
    dy = m[:, :, 1] - cy
    return np.stack([cx + cos_t * dx - sin_t * dy, cy + sin_t * dx + cos_t * dy], axis=-1)


def flip_map(height: int, width: int, axis: str) -> np.ndarray:
    m = identity_map(height, width)
    if axis in ("horizontal", "both"):
        m[:, :, 0] = (width - 1) - m[:, :, 0]
    if axis in ("vertical", "both"):
        m[:, :, 1] = (height - 1) - m[:, :, 1]
    return m


def zoom_out_map(height: int, width: int, factor: float) -> np.ndarray:
    cx, cy = _center(height, width)
    m = identity_map(height, width)
    m[:, :, 0] = cx + (m[:, :, 0] - cx) / factor
    m[:, :, 1] = cy + (m[:, :, 1] - cy) / factor
    return m


def crop_map(size: int, x0: int, y0: int) -> np.ndarray:
    m = identity_map(size, size)
    m[:, :, 0] += x0
    m[:, :, 1] += y0
    return m


def shift_map(height: int, width: int, dx: int, dy: int) -> np.ndarray:
    """Content moves by (+dx, +dy); vacated pixels fall outside the source."""
    m = identity_map(height, width)
    m[:, :, 0] -= dx
    m[:, :, 1] -= dy
    return m


def shear_map(height: int, width: int, factor: float, axis: str) -> np.ndarray:
    # Forward transform is [[1, f], [0, 1]] (x axis) about the center; the
    # backward map applies its inverse, so a pixel f*dy left of its column
    # feeds each output at row offset dy.
    cx, cy = _center(height, width)
    m = identity_map(height, width)
    dx = m[:, :, 0] - cx
    dy = m[:, :, 1] - cy
    if axis == "x":
        return np.stack([cx + dx - factor * dy, cy + dy], axis=-1)
    if axis == "y":
        return np.stack([cx + dx, cy + dy - factor * dx], axis=-1)
    raise ValueError(f"shear axis must be 'x' or 'y', got {axis!r}")


def _rot90_plane(plane, k: int):
    if isinstance(plane, BinaryMask):
        return BinaryMask(np.rot90(plane.data, k).copy())
    return ImagePlane(np.rot90(plane.data, k, axes=(0, 1)).copy())


def rotate(sample: Sample, angle: float | None = None, rng: RandomStream | None = None) -> Sample:
    """Rotate all planes about the center; image bilinear/reflect, masks nearest/zero.

    With ``angle=None`` a continuous angle is drawn uniform in [0, 360).
    """
    if angle is None:
        if rng is None:
            raise ValueError("rotate needs an explicit angle or a random stream")
        angle = rng.uniform() * 360.0
    if not math.isfinite(angle):
        raise ValueError("rotation angle must be finite")
    quarter = angle % 360.0
    if quarter % 90.0 == 0.0 and (quarter % 180.0 == 0.0 or sample.width == sample.height):
        k = int(quarter // 90) % 4
        fov = _rot90_plane(sample.fov, k) if sample.fov is not None else None
        return Sample(image=_rot90_plane(sample.image, k), vessels=_rot90_plane(sample.vessels, k),
                      fov=fov, id=sample.id)
    return warp_sample(sample, rotation_map(sample.height, sample.width, angle))


def flip(sample: Sample, axis: str) -> Sample:
    """Mirror about the given axis; exact for all planes."""
    if axis not in FLIP_AXES:
        raise ValueError(f"flip axis must be one of {FLIP_AXES}")
    if axis == "none":
        return sample
    return warp_sample(sample, flip_map(sample.height, sample.width, axis))


def zoom_out(sample: Sample, factor: float) -> Sample:
    """Scale content toward the center by ``factor``; all planes zero-fill outside."""
    if not 0.0 < factor <= 1.0:
        raise ValueError("zoom-out factor must lie in (0, 1]")
    return warp_sample(sample, zoom_out_map(sample.height, sample.width, factor),
                       image_border="constant")


def random_crop(sample: Sample, size: int, rng: RandomStream) -> Sample:
    """Crop a size x size window at an offset drawn uniform over valid positions.

    Draw order is pinned: x offset, then y offset.
    """
    if not 0 < size <= min(sample.width, sample.height):
        raise ValueError(f"crop size {size} exceeds raster {sample.width}x{sample.height}")
    x0 = rng.integers(0, sample.width - size + 1)
    y0 = rng.integers(0, sample.height - size + 1)
    return warp_sample(sample, crop_map(size, x0, y0))


def shift(sample: Sample, dx: int, dy: int) -> Sample:
    """Integer translation by (+dx, +dy); vacated band zero-filled in all planes."""
    if abs(dx) >= sample.width or abs(dy) >= sample.height:
        raise ValueError("shift magnitude must be smaller than the raster")
    return warp_sample(sample, shift_map(sample.height, sample.width, int(dx), int(dy)),
                       image_border="constant")


def shear(sample: Sample, factor: float, axis: str = "x") -> Sample:
    """Shear about the center along x or y; the center pixel is a fixed point."""
    if abs(factor) > SHEAR_LIMIT:
        raise ValueError(f"shear factor must lie in [-{SHEAR_LIMIT}, {SHEAR_LIMIT}]")
    return warp_sample(sample, shear_map(sample.height, sample.width, factor, axis))
