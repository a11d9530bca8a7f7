"""Declarative augmentation plans.

A plan is an ordered list of (transform, parameter spec, replicate count)
entries plus a master seed.  Parameter specs are either literal values or
small distribution objects resolved per output:

    {"uniform": [lo, hi]}       float drawn uniform in [lo, hi)
    {"uniform_int": [lo, hi]}   integer drawn uniform in [lo, hi] inclusive
    {"choice": [a, b, ...]}     one element drawn uniformly

Resolution draws happen in each transform's declared parameter order from
a dedicated "params" stream, so a replay from recorded values can skip
resolution without desynchronizing the transform's own draws.

Plans serialize as JSON (schema documented in docs/plan-schema.md); the
plan hash is SHA-256 over the canonical form (sorted keys, no whitespace)
so formatting churn never invalidates a manifest.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import affine, elastic, pixel
from .raster import Sample
from .rng import RandomStream

__all__ = [
    "PlanEntry",
    "AugmentationPlan",
    "TransformSpec",
    "TRANSFORMS",
    "resolve_params",
    "apply_transform",
    "default_paper_plan",
    "load_plan",
    "save_plan",
    "plan_hash",
]

PLAN_SCHEMA_VERSION = 1
DEFAULT_MASTER_SEED = 42

MODE_SINGLE = "single"  # one output per (entry, replicate)
MODE_CHAINED = "chained"  # every entry applied in order, chain_count outputs


@dataclass(frozen=True)
class TransformSpec:
    name: str
    geometric: bool
    param_order: tuple[str, ...]
    defaults: dict[str, Any]
    apply: Callable[[Sample, dict, RandomStream], Sample]


def _apply_rotate(sample, params, stream):
    return affine.rotate(sample, angle=float(params["angle"]))


def _apply_flip(sample, params, stream):
    return affine.flip(sample, params["axis"])


def _apply_zoom(sample, params, stream):
    return affine.zoom_out(sample, float(params["factor"]))


def _apply_crop(sample, params, stream):
    return affine.random_crop(sample, int(params["size"]), stream)


def _apply_shift(sample, params, stream):
    return affine.shift(sample, int(params["dx"]), int(params["dy"]))


def _apply_shear(sample, params, stream):
    return affine.shear(sample, float(params["factor"]), params["axis"])


def _apply_elastic(sample, params, stream):
    return elastic.elastic_deform(
        sample, elastic.ElasticParams(alpha=float(params["alpha"]), sigma=float(params["sigma"])), stream)


def _apply_grid(sample, params, stream):
    return elastic.grid_distort(
        sample, elastic.GridDistortParams(cells=int(params["cells"]), limit=float(params["limit"])), stream)


def _apply_optical(sample, params, stream):
    return elastic.optical_distort(sample, elastic.OpticalDistortParams(k=float(params["k"])))


def _with_image(sample: Sample, image) -> Sample:
    return Sample(image=image, vessels=sample.vessels, fov=sample.fov, id=sample.id)


def _apply_noise(sample, params, stream):
    return _with_image(sample, pixel.white_noise(
        sample.image, pixel.WhiteNoiseParams(epsilon=float(params["epsilon"])), stream))


def _apply_gamma(sample, params, stream):
    return _with_image(sample, pixel.gamma_correct(sample.image, pixel.GammaParams(gamma=float(params["gamma"]))))


def _apply_equalize(sample, params, stream):
    return _with_image(sample, pixel.equalize_hist(sample.image))


def _apply_dropout(sample, params, stream):
    return _with_image(sample, pixel.pixel_dropout(
        sample.image, pixel.PixelDropoutParams(p=float(params["p"])), stream))


def _apply_sharpen(sample, params, stream):
    return _with_image(sample, pixel.sharpen(
        sample.image, pixel.FilterParams(blur_sigma=float(params["sigma"]), sharpen_amount=float(params["amount"]))))


def _apply_blur(sample, params, stream):
    return _with_image(sample, pixel.blur(sample.image, pixel.FilterParams(blur_sigma=float(params["sigma"]))))


def _apply_contrast(sample, params, stream):
    return _with_image(sample, pixel.adjust_contrast(
        sample.image, pixel.FilterParams(contrast_factor=float(params["factor"]))))


TRANSFORMS: dict[str, TransformSpec] = {spec.name: spec for spec in [
    TransformSpec("rotate", True, ("angle",), {"angle": {"uniform": [0.0, 360.0]}}, _apply_rotate),
    TransformSpec("flip", True, ("axis",), {"axis": {"choice": ["horizontal", "vertical", "both"]}}, _apply_flip),
    TransformSpec("zoom_out", True, ("factor",), {"factor": {"uniform": [0.6, 0.95]}}, _apply_zoom),
    TransformSpec("random_crop", True, ("size",), {"size": {"uniform_int": [48, 128]}}, _apply_crop),
    TransformSpec("shift", True, ("dx", "dy"),
                  {"dx": {"uniform_int": [-60, 60]}, "dy": {"uniform_int": [-60, 60]}}, _apply_shift),
    TransformSpec("shear", True, ("factor", "axis"),
                  {"factor": {"uniform": [-0.3, 0.3]}, "axis": {"choice": ["x", "y"]}}, _apply_shear),
    TransformSpec("elastic", True, ("alpha", "sigma"), {"alpha": 34.0, "sigma": 4.0}, _apply_elastic),
    TransformSpec("grid_distortion", True, ("cells", "limit"), {"cells": 5, "limit": 0.3}, _apply_grid),
    TransformSpec("optical_distortion", True, ("k",), {"k": {"uniform": [-0.4, 0.4]}}, _apply_optical),
    TransformSpec("white_noise", False, ("epsilon",), {"epsilon": {"choice": [5.0, 10.0, 20.0]}}, _apply_noise),
    TransformSpec("gamma", False, ("gamma",), {"gamma": {"uniform": [0.5, 2.0]}}, _apply_gamma),
    TransformSpec("equalize_hist", False, (), {}, _apply_equalize),
    TransformSpec("pixel_dropout", False, ("p",), {"p": 0.05}, _apply_dropout),
    TransformSpec("sharpen", False, ("amount", "sigma"),
                  {"amount": {"uniform": [0.5, 1.5]}, "sigma": 1.5}, _apply_sharpen),
    TransformSpec("blur", False, ("sigma",), {"sigma": {"uniform": [0.8, 2.0]}}, _apply_blur),
    TransformSpec("contrast", False, ("factor",), {"factor": {"uniform": [0.6, 1.6]}}, _apply_contrast),
]}


@dataclass(frozen=True)
class PlanEntry:
    transform: str
    params: dict[str, Any] = field(default_factory=dict)
    count: int = 1

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.count < 1:
            raise ValueError("replicate count must be >= 1")
        spec = TRANSFORMS[self.transform]
        for key in self.params:
            if key not in spec.param_order:
                raise ValueError(f"transform {self.transform!r} has no parameter {key!r}")


@dataclass(frozen=True)
class AugmentationPlan:
    entries: tuple[PlanEntry, ...]
    master_seed: int = DEFAULT_MASTER_SEED
    include_originals: bool = True
    mode: str = MODE_SINGLE
    chain_count: int = 1

    def __post_init__(self):
        if self.mode not in (MODE_SINGLE, MODE_CHAINED):
            raise ValueError(f"unknown composition mode {self.mode!r}")
        if self.chain_count < 1:
            raise ValueError("chain count must be >= 1")

    def outputs_per_source(self) -> int:
        augmented = sum(e.count for e in self.entries) if self.mode == MODE_SINGLE else self.chain_count
        return int(self.include_originals) + augmented

    def to_dict(self) -> dict:
        return {
            "schema": PLAN_SCHEMA_VERSION,
            "seed": self.master_seed,
            "include_originals": self.include_originals,
            "mode": self.mode,
            "chain_count": self.chain_count,
            "entries": [{"transform": e.transform, "params": e.params, "count": e.count}
                        for e in self.entries],
        }

    @staticmethod
    def from_dict(data: dict) -> "AugmentationPlan":
        if data.get("schema") != PLAN_SCHEMA_VERSION:
            raise ValueError(f"unsupported plan schema {data.get('schema')!r}")
        entries = tuple(PlanEntry(transform=e["transform"], params=dict(e.get("params", {})),
                                  count=int(e.get("count", 1)))
                        for e in data["entries"])
        return AugmentationPlan(entries=entries,
                                master_seed=int(data.get("seed", DEFAULT_MASTER_SEED)),
                                include_originals=bool(data.get("include_originals", True)),
                                mode=data.get("mode", MODE_SINGLE),
                                chain_count=int(data.get("chain_count", 1)))


def canonical_json(data: dict) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def plan_hash(plan: AugmentationPlan) -> str:
    return hashlib.sha256(canonical_json(plan.to_dict()).encode("utf-8")).hexdigest()


def load_plan(path) -> AugmentationPlan:
    with open(path, "r", encoding="utf-8") as fh:
        return AugmentationPlan.from_dict(json.load(fh))


def save_plan(plan: AugmentationPlan, path) -> None:
    Path(path).write_text(json.dumps(plan.to_dict(), indent=2) + "\n", encoding="utf-8")


def _resolve_value(spec: Any, stream: RandomStream) -> Any:
    if isinstance(spec, dict):
        if set(spec) == {"uniform"}:
            lo, hi = spec["uniform"]
            return float(stream.uniform_in(float(lo), float(hi)))
        if set(spec) == {"uniform_int"}:
            lo, hi = spec["uniform_int"]
            return int(stream.integers(int(lo), int(hi) + 1))
        if set(spec) == {"choice"}:
            return stream.choice(spec["choice"])
        raise ValueError(f"unknown parameter distribution {spec!r}")
    return spec


def resolve_params(entry: PlanEntry, stream: RandomStream) -> dict[str, Any]:
    """Draw concrete parameter values, in the transform's declared order."""
    spec = TRANSFORMS[entry.transform]
    resolved = {}
    for name in spec.param_order:
        value = entry.params.get(name, spec.defaults.get(name))
        if value is None:
            raise ValueError(f"transform {entry.transform!r} is missing parameter {name!r}")
        resolved[name] = _resolve_value(value, stream)
    return resolved


def apply_transform(sample: Sample, name: str, resolved: dict[str, Any],
                    stream: RandomStream) -> Sample:
    """Apply a registered transform with fully resolved parameters.

    Pixel-level transforms must leave masks untouched; that contract is
    asserted here on every application.
    """
    spec = TRANSFORMS[name]
    out = spec.apply(sample, resolved, stream)
    if not spec.geometric:
        if not np.array_equal(out.vessels.data, sample.vessels.data):
            raise AssertionError(f"pixel transform {name} altered the vessel mask")
        if (out.fov is None) != (sample.fov is None) or (
                out.fov is not None and not np.array_equal(out.fov.data, sample.fov.data)):
            raise AssertionError(f"pixel transform {name} altered the fov mask")
    return out


def default_paper_plan(master_seed: int = DEFAULT_MASTER_SEED) -> AugmentationPlan:
    """Staged plan covering all sixteen augmentations, 63 outputs per source.

    The stage order mirrors how the technique families were added during
    model development: rotations and flips first, then shift/zoom/crop,
    then noise and elastic warps, then gamma, then the remainder.  The
    parameter values are this artifact's defaults, not published settings.
    """
    entries = (
        # stage 1: rotations and flips
        PlanEntry("rotate", {"angle": {"uniform": [0.0, 360.0]}}, 6),
        PlanEntry("rotate", {"angle": {"choice": [90.0, 180.0, 270.0]}}, 3),
        PlanEntry("flip", {"axis": {"choice": ["horizontal", "vertical", "both"]}}, 3),
        # stage 2: push content around
        PlanEntry("shift", {"dx": {"uniform_int": [-60, 60]}, "dy": {"uniform_int": [-60, 60]}}, 5),
        PlanEntry("zoom_out", {"factor": {"uniform": [0.6, 0.95]}}, 5),
        PlanEntry("random_crop", {"size": {"uniform_int": [48, 128]}}, 5),
        # stage 3: noise and elastic warps
        PlanEntry("white_noise", {"epsilon": {"choice": [5.0, 10.0, 20.0]}}, 6),
        PlanEntry("elastic", {"alpha": 34.0, "sigma": 4.0}, 6),
        # stage 4: brightness repair
        PlanEntry("gamma", {"gamma": {"uniform": [0.5, 2.0]}}, 6),
        # stage 5: remainder
        PlanEntry("blur", {"sigma": {"uniform": [0.8, 2.0]}}, 3),
        PlanEntry("pixel_dropout", {"p": 0.05}, 3),
        PlanEntry("equalize_hist", {}, 1),
        PlanEntry("grid_distortion", {"cells": 5, "limit": 0.3}, 3),
        PlanEntry("optical_distortion", {"k": {"uniform": [-0.4, 0.4]}}, 3),
        PlanEntry("shear", {"factor": {"uniform": [-0.3, 0.3]}, "axis": {"choice": ["x", "y"]}}, 3),
        PlanEntry("sharpen", {"amount": {"uniform": [0.5, 1.5]}, "sigma": 1.5}, 1),
        PlanEntry("contrast", {"factor": {"uniform": [0.6, 1.6]}}, 1),
    )
    return AugmentationPlan(entries=entries, master_seed=master_seed, include_originals=True)
