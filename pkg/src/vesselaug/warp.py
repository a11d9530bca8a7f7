"""Shared backward-warp kernel.

Every geometric transform reduces to one coordinate map: an (H, W, 2)
array giving, for each output pixel, the (x, y) source position it reads.
``warp_sample`` applies a single map to all planes of a sample, which is
what makes image/mask pairing exact by construction: the photograph warps
with bilinear interpolation, the masks with nearest neighbor (preserving
{0, 1}), but through the identical geometry.

Conventions:

* coordinates are pixel-centered; (0, 0) is the center of the top-left
  pixel, x runs along columns, y along rows
* ``reflect`` border mirrors about the edge pixel centers with edge
  duplication (... c b a | a b c ...), matching a symmetric pad
* ``constant`` border reads 0 outside the raster; bilinear blends with 0
  across the boundary
* nearest neighbor rounds half up: source index = floor(coord + 0.5)

Integer-valued maps are exact for both interpolation modes (bilinear
weights degenerate to 0/1), so flips, integer shifts and crops built on
this kernel are bit-exact.

Two implementations share these conventions: a compiled per-pixel kernel
(numba, used when available, it dominates the expansion hot path) and a
vectorized numpy one that doubles as its cross-check oracle in the tests.
"""

from __future__ import annotations

import numpy as np

from .raster import BinaryMask, ImagePlane, Sample

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # slower but identical semantics
    _HAVE_NUMBA = False

__all__ = ["identity_map", "resample", "resample_array", "warp_sample"]


def identity_map(height: int, width: int) -> np.ndarray:
    """Map sending every output pixel to itself."""
    yy, xx = np.mgrid[0:height, 0:width]
    return np.stack([xx, yy], axis=-1).astype(np.float64)


def _reflect_index(idx: np.ndarray, n: int) -> np.ndarray:
    # Symmetric reflection with period 2n: ... 2 1 0 | 0 1 2 ... n-1 | n-1 ...
    if n == 1:
        return np.zeros_like(idx)
    idx = np.mod(idx, 2 * n)
    return np.where(idx >= n, 2 * n - 1 - idx, idx)


def _gather(arr: np.ndarray, iy: np.ndarray, ix: np.ndarray, border: str) -> np.ndarray:
    h, w = arr.shape[:2]
    if border == "reflect":
        return arr[_reflect_index(iy, h), _reflect_index(ix, w)]
    valid = (iy >= 0) & (iy < h) & (ix >= 0) & (ix < w)
    out = arr[np.clip(iy, 0, h - 1), np.clip(ix, 0, w - 1)]
    if arr.ndim == 3:
        valid = valid[..., None]
    return np.where(valid, out, 0)


def _resample_numpy(arr: np.ndarray, x: np.ndarray, y: np.ndarray, interpolation: str,
                    border: str) -> np.ndarray:
    if interpolation == "nearest":
        ix = np.floor(x + 0.5).astype(np.int64)
        iy = np.floor(y + 0.5).astype(np.int64)
        return _gather(arr, iy, ix, border)
    x0f = np.floor(x)
    y0f = np.floor(y)
    fx = x - x0f
    fy = y - y0f
    x0 = x0f.astype(np.int64)
    y0 = y0f.astype(np.int64)
    if arr.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    v00 = _gather(arr, y0, x0, border)
    v01 = _gather(arr, y0, x0 + 1, border)
    v10 = _gather(arr, y0 + 1, x0, border)
    v11 = _gather(arr, y0 + 1, x0 + 1, border)
    top = v00 * (1.0 - fx) + v01 * fx
    bottom = v10 * (1.0 - fx) + v11 * fx
    return top * (1.0 - fy) + bottom * fy


if _HAVE_NUMBA:

    @njit(cache=True)
    def _reflect_i(idx, n):
        if n == 1:
            return 0
        idx = idx % (2 * n)
        if idx < 0:
            idx += 2 * n
        if idx >= n:
            idx = 2 * n - 1 - idx
        return idx

    @njit(cache=True)
    def _bilinear_f64(arr, x, y, reflect):
        h, w, c = arr.shape
        oh, ow = x.shape
        out = np.empty((oh, ow, c), dtype=np.float64)
        for i in range(oh):
            for j in range(ow):
                xx = x[i, j]
                yy = y[i, j]
                x0f = np.floor(xx)
                y0f = np.floor(yy)
                fx = xx - x0f
                fy = yy - y0f
                ix0 = int(x0f)
                iy0 = int(y0f)
                ix1 = ix0 + 1
                iy1 = iy0 + 1
                if reflect:
                    rx0 = _reflect_i(ix0, w)
                    rx1 = _reflect_i(ix1, w)
                    ry0 = _reflect_i(iy0, h)
                    ry1 = _reflect_i(iy1, h)
                    for k in range(c):
                        v00 = arr[ry0, rx0, k]
                        v01 = arr[ry0, rx1, k]
                        v10 = arr[ry1, rx0, k]
                        v11 = arr[ry1, rx1, k]
                        top = v00 * (1.0 - fx) + v01 * fx
                        bottom = v10 * (1.0 - fx) + v11 * fx
                        out[i, j, k] = top * (1.0 - fy) + bottom * fy
                else:
                    x0_in = 0 <= ix0 < w
                    x1_in = 0 <= ix1 < w
                    y0_in = 0 <= iy0 < h
                    y1_in = 0 <= iy1 < h
                    for k in range(c):
                        v00 = arr[iy0, ix0, k] if (y0_in and x0_in) else 0.0
                        v01 = arr[iy0, ix1, k] if (y0_in and x1_in) else 0.0
                        v10 = arr[iy1, ix0, k] if (y1_in and x0_in) else 0.0
                        v11 = arr[iy1, ix1, k] if (y1_in and x1_in) else 0.0
                        top = v00 * (1.0 - fx) + v01 * fx
                        bottom = v10 * (1.0 - fx) + v11 * fx
                        out[i, j, k] = top * (1.0 - fy) + bottom * fy
        return out

    @njit(cache=True)
    def _nearest_u8(arr, x, y, reflect):
        h, w = arr.shape
        oh, ow = x.shape
        out = np.empty((oh, ow), dtype=np.uint8)
        for i in range(oh):
            for j in range(ow):
                ix = int(np.floor(x[i, j] + 0.5))
                iy = int(np.floor(y[i, j] + 0.5))
                if reflect:
                    out[i, j] = arr[_reflect_i(iy, h), _reflect_i(ix, w)]
                elif 0 <= ix < w and 0 <= iy < h:
                    out[i, j] = arr[iy, ix]
                else:
                    out[i, j] = 0
        return out


def resample_array(arr: np.ndarray, coord_map: np.ndarray, interpolation: str, border: str) -> np.ndarray:
    """Backward-warp a (H, W) or (H, W, C) array through ``coord_map``."""
    if coord_map.ndim != 3 or coord_map.shape[2] != 2:
        raise ValueError(f"coordinate map must be (H, W, 2), got {coord_map.shape}")
    if border not in ("reflect", "constant"):
        raise ValueError(f"unknown border policy {border!r}")
    if interpolation not in ("bilinear", "nearest"):
        raise ValueError(f"unknown interpolation {interpolation!r}")
    x = np.ascontiguousarray(coord_map[:, :, 0], dtype=np.float64)
    y = np.ascontiguousarray(coord_map[:, :, 1], dtype=np.float64)
    reflect = border == "reflect"

    if _HAVE_NUMBA:
        if interpolation == "bilinear" and arr.dtype == np.float64:
            squeeze = arr.ndim == 2
            data = np.ascontiguousarray(arr[:, :, None] if squeeze else arr)
            out = _bilinear_f64(data, x, y, reflect)
            return out[:, :, 0] if squeeze else out
        if interpolation == "nearest" and arr.dtype == np.uint8 and arr.ndim == 2:
            return _nearest_u8(np.ascontiguousarray(arr), x, y, reflect)
    return _resample_numpy(arr, x, y, interpolation, border)


def resample(plane: ImagePlane | BinaryMask, coord_map: np.ndarray, interpolation: str = "bilinear",
             border: str = "reflect") -> ImagePlane | BinaryMask:
    """Warp a single plane.  Masks only admit nearest interpolation."""
    if isinstance(plane, BinaryMask):
        if interpolation != "nearest":
            raise ValueError("binary masks must be resampled with nearest interpolation")
        return BinaryMask(resample_array(plane.data, coord_map, "nearest", border))
    if isinstance(plane, ImagePlane):
        return ImagePlane(resample_array(plane.data, coord_map, interpolation, border))
    raise TypeError(f"cannot resample {type(plane).__name__}")


def warp_sample(sample: Sample, coord_map: np.ndarray, image_border: str = "reflect") -> Sample:
    """Warp image (bilinear) and masks (nearest, zero fill) through one map.

    ``image_border`` is "reflect" for in-place warps and "constant" for
    transforms that vacate canvas (shift, zoom out); masks always fill
    with 0 so no vessel or FOV content is ever fabricated.
    """
    image = resample(sample.image, coord_map, "bilinear", image_border)
    vessels = resample(sample.vessels, coord_map, "nearest", "constant")
    fov = resample(sample.fov, coord_map, "nearest", "constant") if sample.fov is not None else None
    return Sample(image=image, vessels=vessels, fov=fov, id=sample.id)
