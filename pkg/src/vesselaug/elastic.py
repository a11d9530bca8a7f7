"""Warp-family transforms: elastic deformation, grid distortion, optical distortion.

All three produce a coordinate map and funnel through ``warp.warp_sample``
like the affine ops, so image/mask pairing holds by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .raster import Sample
from .rng import RandomStream
from .warp import identity_map, warp_sample

__all__ = [
    "ElasticParams",
    "GridDistortParams",
    "OpticalDistortParams",
    "elastic_deform",
    "grid_distort",
    "optical_distort",
    "elastic_displacement",
    "grid_axis_positions",
    "grid_map",
    "optical_map",
]

# Gaussian truncation for smoothing the random displacement fields.  Not a
# tunable: changing it changes every elastic golden file.
FIELD_TRUNCATE = 4.0


@dataclass(frozen=True)
class ElasticParams:
    """Displacement magnitude ``alpha`` (pixels) and smoothing radius ``sigma``."""

    alpha: float
    sigma: float

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class GridDistortParams:
    """Cells per axis (>= 2) and distortion limit d: factors drawn in [1-d, 1+d]."""

    cells: int
    limit: float

    def __post_init__(self):
        if self.cells < 2:
            raise ValueError("grid distortion needs at least 2 cells per axis")
        if not 0.0 <= self.limit <= 0.5:
            raise ValueError("distortion limit must lie in [0, 0.5]")


@dataclass(frozen=True)
class OpticalDistortParams:
    """Single radial coefficient k; k > 0 pincushion, k < 0 barrel."""

    k: float

    def __post_init__(self):
        if abs(self.k) > 0.5:
            raise ValueError("radial coefficient must lie in [-0.5, 0.5]")


def elastic_displacement(height: int, width: int, alpha: float, sigma: float,
                         rng: RandomStream) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed random displacement field.

    Two full-resolution standard-normal fields are drawn (dx first, then
    dy), Gaussian-smoothed with radius ``sigma`` (reflect boundary), and
    scaled by ``alpha``.
    """
    dx = rng.normal((height, width))
    dy = rng.normal((height, width))
    dx = alpha * gaussian_filter(dx, sigma, mode="reflect", truncate=FIELD_TRUNCATE)
    dy = alpha * gaussian_filter(dy, sigma, mode="reflect", truncate=FIELD_TRUNCATE)
    return dx, dy


def elastic_deform(sample: Sample, params: ElasticParams, rng: RandomStream) -> Sample:
    """Backward-warp all planes through one smoothed random displacement field."""
    dx, dy = elastic_displacement(sample.height, sample.width, params.alpha, params.sigma, rng)
    coord = identity_map(sample.height, sample.width)
    coord[:, :, 0] += dx
    coord[:, :, 1] += dy
    return warp_sample(sample, coord)


def grid_axis_positions(extent: float, factors: np.ndarray) -> np.ndarray:
    """Source-side cell boundaries for one axis.

    Each of the n equal output cells maps linearly onto a source interval
    whose width is the cell's drawn factor times the base width; widths are
    renormalized so the boundaries still span [0, extent] exactly.
    """
    factors = np.asarray(factors, dtype=np.float64)
    if factors.ndim != 1 or len(factors) < 2:
        raise ValueError("need one factor per cell, at least 2 cells")
    if (factors <= 0).any():
        raise ValueError("cell scale factors must be positive")
    if extent <= 0:
        raise ValueError("axis extent must be positive (raster at least 2 pixels wide)")
    widths = factors * (extent / len(factors))
    bounds = np.concatenate([[0.0], np.cumsum(widths)])
    bounds *= extent / bounds[-1]
    bounds[-1] = extent
    return bounds


def grid_map(height: int, width: int, factors_x: np.ndarray, factors_y: np.ndarray) -> np.ndarray:
    """Piecewise-linear monotone map built from per-cell scale factors."""
    bx = grid_axis_positions(width - 1.0, factors_x)
    by = grid_axis_positions(height - 1.0, factors_y)
    knots_x = np.linspace(0.0, width - 1.0, len(bx))
    knots_y = np.linspace(0.0, height - 1.0, len(by))
    src_x = np.interp(np.arange(width, dtype=np.float64), knots_x, bx)
    src_y = np.interp(np.arange(height, dtype=np.float64), knots_y, by)
    return np.stack(np.meshgrid(src_x, src_y, indexing="xy"), axis=-1)


def grid_distort(sample: Sample, params: GridDistortParams, rng: RandomStream) -> Sample:
    """Stretch/compress a uniform grid of cells; x-axis factors drawn before y."""
    lo, hi = 1.0 - params.limit, 1.0 + params.limit
    factors_x = rng.uniform_in(lo, hi, params.cells)
    factors_y = rng.uniform_in(lo, hi, params.cells)
    return warp_sample(sample, grid_map(sample.height, sample.width, factors_x, factors_y))


def optical_map(height: int, width: int, k: float) -> np.ndarray:
    """Radial model about the center: source radius r*(1 + k*r^2), r normalized
    so the raster corners sit at r = 1."""
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    m = identity_map(height, width)
    dx = m[:, :, 0] - cx
    dy = m[:, :, 1] - cy
    corner_sq = cx * cx + cy * cy
    r2 = (dx * dx + dy * dy) / corner_sq if corner_sq > 0 else np.zeros_like(dx)
    scale = 1.0 + k * r2
    return np.stack([cx + dx * scale, cy + dy * scale], axis=-1)


def optical_distort(sample: Sample, params: OpticalDistortParams) -> Sample:
    return warp_sample(sample, optical_map(sample.height, sample.width, params.k))
