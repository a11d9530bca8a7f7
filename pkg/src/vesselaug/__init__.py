"""Deterministic paired image/mask augmentation and evaluation for retinal vessel datasets."""

__version__ = "0.1.0"

from .raster import BinaryMask, ImagePlane, ProbabilityMap, Sample  # noqa: F401
