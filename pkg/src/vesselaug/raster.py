"""Raster types and PNG I/O.

The working representation for photographs is floating point in [0, 1]
(values are clipped into range at construction and after every pixel
transform); masks are strict {0, 1} rasters.  All types are immutable:
the wrapped arrays are frozen at construction and every operation returns
a new instance, so instances are safe to share across threads.

On disk everything is PNG: 8-bit for images (quantized ``floor(v*255 + 0.5)``)
and masks ({0, 255}); probability maps use 16-bit grayscale so AUC
rankings survive the round trip.  Supported inputs are 8/16-bit grayscale
and 8-bit RGB; palette images without transparency are expanded, palette
with alpha is rejected.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "ImagePlane",
    "BinaryMask",
    "ProbabilityMap",
    "Sample",
    "load_png",
    "encode_png",
    "save_png",
    "load_prob_png",
    "save_prob_png",
]

# Pinned: PNG bytes are part of the determinism contract (manifests store
# checksums of encoded files), so the compression level is fixed.
PNG_COMPRESS_LEVEL = 3


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ImagePlane:
    """H x W x C raster of floats in [0, 1]; C is 1 (gray) or 3 (RGB)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(f"image must be HxW or HxWxC with C in (1, 3), got shape {arr.shape}")
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValueError("zero-dimension image")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite samples")
        arr = np.clip(arr, 0.0, 1.0)
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class BinaryMask:
    """H x W raster holding exactly {0, 1}.

    ``coerced_values`` records that loading had to binarize samples that
    were neither 0 nor full scale; it does not take part in equality.
    """

    data: np.ndarray
    coerced_values: bool = field(default=False, compare=False)

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"mask must be HxW, got shape {arr.shape}")
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValueError("zero-dimension mask")
        arr = arr.astype(np.uint8, copy=True)
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("mask values must be exactly 0 or 1")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def foreground(self) -> int:
        return int(self.data.sum())


@dataclass(frozen=True)
class ProbabilityMap:
    """H x W per-pixel scores in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"probability map must be HxW, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("scores must be finite and in [0, 1]")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Sample:
    """Image plus its vessel ground truth and optional field-of-view mask.

    The three planes move through every geometric transform as one unit;
    a missing FOV means "all pixels count" and is materialized only at
    evaluation time.
    """

    image: ImagePlane
    vessels: BinaryMask
    fov: BinaryMask | None = None
    id: str = ""

    def __post_init__(self):
        shape = (self.image.height, self.image.width)
        if self.vessels.data.shape != shape:
            raise ValueError(f"sample {self.id!r}: vessel mask {self.vessels.data.shape} does not match image {shape}")
        if self.fov is not None and self.fov.data.shape != shape:
            raise ValueError(f"sample {self.id!r}: fov mask {self.fov.data.shape} does not match image {shape}")

    @property
    def height(self) -> int:
        return self.image.height

    @property
    def width(self) -> int:
        return self.image.width


def _open_png(path) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise ValueError(f"unreadable image file {path}: {exc}") from exc
    if img.width == 0 or img.height == 0:
        raise ValueError(f"zero-dimension image {path}")
    if img.mode == "P":
        if "transparency" in img.info:
            raise ValueError(f"unsupported PNG variant (palette with alpha): {path}")
        img = img.convert("RGB")
    return img


def _decode_scaled(img: Image.Image, path) -> np.ndarray:
    """Decode to float64 in [0, 1] by dividing by the bit-depth maximum."""
    if img.mode == "L":
        return np.asarray(img, dtype=np.float64) / 255.0
    if img.mode in ("I", "I;16"):
        arr = np.asarray(img, dtype=np.float64)
        if arr.min() < 0 or arr.max() > 65535:
            raise ValueError(f"unsupported sample range in {path}")
        return arr / 65535.0
    if img.mode == "RGB":
        return np.asarray(img, dtype=np.float64) / 255.0
    raise ValueError(f"unsupported PNG variant ({img.mode}): {path}")


def load_png(path, kind: str = "image") -> ImagePlane | BinaryMask:
    """Load a PNG as an ImagePlane (``kind="image"``) or BinaryMask (``kind="mask"``).

    Masks binarize at threshold 0.5 (>= 0.5 is foreground) and flag
    whether any value other than 0 or full scale had to be coerced.
    """
    img = _open_png(path)
    scaled = _decode_scaled(img, path)
    if kind == "image":
        return ImagePlane(scaled)
    if kind == "mask":
        if scaled.ndim == 3:
            if not (scaled == scaled[:, :, :1]).all():
                raise ValueError(f"mask {path} is RGB with unequal channels")
            scaled = scaled[:, :, 0]
        coerced = bool(((scaled != 0.0) & (scaled != 1.0)).any())
        return BinaryMask((scaled >= 0.5).astype(np.uint8), coerced_values=coerced)
    raise ValueError(f"unknown kind {kind!r}")


def encode_png(raster: ImagePlane | BinaryMask) -> bytes:
    """Encode as 8-bit PNG bytes; images quantize by floor(v*255 + 0.5), masks as {0, 255}."""
    if isinstance(raster, ImagePlane):
        arr = np.floor(raster.data * 255.0 + 0.5).astype(np.uint8)
        img = Image.fromarray(arr[:, :, 0], mode="L") if raster.channels == 1 else Image.fromarray(arr, mode="RGB")
    elif isinstance(raster, BinaryMask):
        img = Image.fromarray(raster.data * np.uint8(255), mode="L")
    else:
        raise TypeError(f"cannot encode {type(raster).__name__} as PNG")
    buf = io.BytesIO()
    img.save(buf, format="PNG", compress_level=PNG_COMPRESS_LEVEL)
    return buf.getvalue()


def save_png(raster: ImagePlane | BinaryMask, path) -> None:
    """Write ``encode_png`` output to ``path``."""
    Path(path).write_bytes(encode_png(raster))


def load_prob_png(path) -> ProbabilityMap:
    """Load a grayscale PNG (8 or 16 bit) as a probability map."""
    plane = load_png(path, kind="image")
    if plane.channels != 1:
        raise ValueError(f"probability map {path} must be grayscale")
    return ProbabilityMap(plane.data[:, :, 0])


def save_prob_png(pmap: ProbabilityMap, path) -> None:
    """Write scores as 16-bit grayscale, quantized by floor(v*65535 + 0.5)."""
    arr = np.floor(pmap.data * 65535.0 + 0.5).astype(np.uint16)
    Image.fromarray(arr).save(Path(path), format="PNG", compress_level=PNG_COMPRESS_LEVEL)
