"""Dataset expansion: N sources -> N x (originals + replicates) outputs plus a manifest.

The output tree mirrors the input layout (``images/``, ``masks/``, and
``fov/`` when present) with ``aug_<entry>_<replicate>_`` stem prefixes.
Every output gets one manifest record carrying its resolved parameters
and seed derivation path, enough to regenerate the files bit-exactly.

Execution is embarrassingly parallel over records: each record derives
its own streams from (master seed, sample id, entry, replicate), so the
emitted bytes are identical whether the run uses one worker or many.
Files are written atomically (temp + rename) and the manifest is
assembled in a fixed order independent of completion order.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from . import __version__
from .plan import AugmentationPlan, apply_transform, plan_hash, resolve_params
from .raster import BinaryMask, ImagePlane, Sample, encode_png, load_png
from .rng import CONVENTION, SeedSpec, derive_stream

__all__ = [
    "Manifest",
    "ExpandResult",
    "expand_dataset",
    "replay",
    "verify_record",
    "scan_sources",
    "load_sample",
]

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
MANIFEST_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Manifest:
    header: dict
    records: tuple[dict, ...]

    def save(self, path) -> None:
        lines = [json.dumps(self.header, sort_keys=True)]
        lines.extend(json.dumps(rec, sort_keys=True) for rec in self.records)
        _atomic_write_bytes(Path(path), ("\n".join(lines) + "\n").encode("utf-8"))

    @staticmethod
    def load(path) -> "Manifest":
        with open(path, "r", encoding="utf-8") as fh:
            rows = [json.loads(line) for line in fh if line.strip()]
        if not rows or rows[0].get("kind") != "header":
            raise ValueError(f"{path} is not a manifest (missing header line)")
        return Manifest(header=rows[0], records=tuple(rows[1:]))

    def find(self, stem: str) -> dict:
        for rec in self.records:
            if rec["stem"] == stem:
                return rec
        raise KeyError(f"no manifest record for stem {stem!r}")


@dataclass(frozen=True)
class ExpandResult:
    manifest: Manifest
    manifest_path: Path
    failures: tuple[tuple[str, str], ...]  # (output stem, error message)


def scan_sources(source_dir) -> list[str]:
    """Stems available under source_dir/images with a matching mask."""
    source_dir = Path(source_dir)
    images = source_dir / "images"
    if not images.is_dir():
        raise FileNotFoundError(f"source layout must contain {images}")
    stems = sorted(p.stem for p in images.glob("*.png"))
    if not stems:
        raise FileNotFoundError(f"no PNG images under {images}")
    missing = [s for s in stems if not (source_dir / "masks" / f"{s}.png").exists()]
    if missing:
        raise FileNotFoundError(f"missing vessel masks for stems: {', '.join(missing)}")
    return stems


def load_sample(source_dir, stem: str) -> Sample:
    source_dir = Path(source_dir)
    image = load_png(source_dir / "images" / f"{stem}.png", kind="image")
    vessels = load_png(source_dir / "masks" / f"{stem}.png", kind="mask")
    fov_path = source_dir / "fov" / f"{stem}.png"
    fov = load_png(fov_path, kind="mask") if fov_path.exists() else None
    return Sample(image=image, vessels=vessels, fov=fov, id=stem)


def _atomic_write_bytes(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def _record_stem(kind: str, stem: str, entry: int | None, rep: int | None) -> str:
    if kind == "original":
        return stem
    if kind == "chain":
        return f"aug_chain_{rep}_{stem}"
    return f"aug_{entry}_{rep}_{stem}"


def _plan_records(plan: AugmentationPlan, stems: list[str]) -> list[dict]:
    """Deterministic output schedule; one dict per emitted sample."""
    schedule = []
    for stem in stems:
        if plan.include_originals:
            schedule.append({"kind": "original", "source": stem, "entry": None, "replicate": None})
        if plan.mode == "single":
            for entry_idx, entry in enumerate(plan.entries):
                for rep in range(entry.count):
                    schedule.append({"kind": "single", "source": stem, "entry": entry_idx, "replicate": rep})
        else:
            for rep in range(plan.chain_count):
                schedule.append({"kind": "chain", "source": stem, "entry": None, "replicate": rep})
    return schedule


def _generate(sample: Sample, plan: AugmentationPlan, master_seed: int, task: dict) -> tuple[Sample, dict]:
    """Produce the output sample for one schedule slot plus its record fields."""
    kind = task["kind"]
    if kind == "original":
        return sample, {"transform": "original", "params": None, "seed_path": None, "seed_digest": None}
    if kind == "single":
        entry = plan.entries[task["entry"]]
        params_spec = SeedSpec(master_seed, sample.id, task["entry"], task["replicate"], role="params")
        resolved = resolve_params(entry, derive_stream(params_spec))
        apply_spec = SeedSpec(master_seed, sample.id, task["entry"], task["replicate"], role="apply")
        out = apply_transform(sample, entry.transform, resolved, derive_stream(apply_spec))
        return out, {"transform": entry.transform, "params": resolved,
                     "seed_path": apply_spec.path(), "seed_digest": f"{apply_spec.key():032x}"}
    # chained: every entry in order, per-step streams keyed by entry index
    out = sample
    steps = []
    rep = task["replicate"]
    for entry_idx, entry in enumerate(plan.entries):
        params_spec = SeedSpec(master_seed, sample.id, entry_idx, rep, role="params")
        resolved = resolve_params(entry, derive_stream(params_spec))
        apply_spec = SeedSpec(master_seed, sample.id, entry_idx, rep, role="apply")
        out = apply_transform(out, entry.transform, resolved, derive_stream(apply_spec))
        steps.append({"transform": entry.transform, "params": resolved})
    chain_path = SeedSpec(master_seed, sample.id, -1, rep, role="apply").path()
    return out, {"transform": "chain", "params": steps, "seed_path": chain_path, "seed_digest": None}


def _emit(sample: Sample, out_dir: Path, stem: str) -> tuple[dict, dict]:
    """Encode and atomically write all planes; returns (files, sha256) maps."""
    files = {"image": f"images/{stem}.png", "vessels": f"masks/{stem}.png"}
    payloads = {"image": encode_png(sample.image), "vessels": encode_png(sample.vessels)}
    if sample.fov is not None:
        files["fov"] = f"fov/{stem}.png"
        payloads["fov"] = encode_png(sample.fov)
    else:
        files["fov"] = None
    digests = {}
    for key, payload in payloads.items():
        path = out_dir / files[key]
        _atomic_write_bytes(path, payload)
        digests[key] = hashlib.sha256(payload).hexdigest()
    if files["fov"] is None:
        digests["fov"] = None
    return files, digests


# Worker-process state (also used for serial runs).
_WORKER: dict = {}


def _init_worker(source_dir: str, out_dir: str, plan: AugmentationPlan, master_seed: int) -> None:
    _WORKER["source_dir"] = Path(source_dir)
    _WORKER["out_dir"] = Path(out_dir)
    _WORKER["plan"] = plan
    _WORKER["master_seed"] = master_seed
    _WORKER["cache"] = lru_cache(maxsize=4)(lambda stem: load_sample(_WORKER["source_dir"], stem))


def _run_task(task: dict) -> dict:
    stem_out = _record_stem(task["kind"], task["source"], task["entry"], task["replicate"])
    try:
        source = _WORKER["cache"](task["source"])
        out, fields = _generate(source, _WORKER["plan"], _WORKER["master_seed"], task)
        files, digests = _emit(out, _WORKER["out_dir"], stem_out)
    except Exception as exc:  # propagate with sample context, keep siblings running
        return {"kind": "error", "stem": stem_out, "source_id": task["source"],
                "error": f"sample {task['source']!r}: {exc}"}
    record = {"kind": "record", "stem": stem_out, "source_id": task["source"],
              "entry": task["entry"], "replicate": task["replicate"],
              "files": files, "sha256": digests}
    record.update(fields)
    return record


def expand_dataset(source_dir, plan: AugmentationPlan, out_dir, threads: int = 1,
                   master_seed: int | None = None) -> ExpandResult:
    """Expand every source sample per the plan and write the manifest.

    ``threads`` only changes wall time, never bytes.  Per-record failures
    are collected and reported, not fatal; configuration problems raise.
    """
    source_dir, out_dir = Path(source_dir), Path(out_dir)
    seed = plan.master_seed if master_seed is None else master_seed
    stems = scan_sources(source_dir)
    schedule = _plan_records(plan, stems)

    out_stems = [_record_stem(t["kind"], t["source"], t["entry"], t["replicate"]) for t in schedule]
    dupes = {s for s in out_stems if out_stems.count(s) > 1} if len(set(out_stems)) != len(out_stems) else set()
    if dupes:
        raise ValueError(f"output stem collision: {', '.join(sorted(dupes))}")

    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    if any((source_dir / "fov" / f"{s}.png").exists() for s in stems):
        (out_dir / "fov").mkdir(parents=True, exist_ok=True)

    if threads > 1 and len(schedule) > 1:
        chunk = max(1, len(schedule) // (threads * 4))
        with ProcessPoolExecutor(max_workers=threads, initializer=_init_worker,
                                 initargs=(str(source_dir), str(out_dir), plan, seed)) as pool:
            results = list(pool.map(_run_task, schedule, chunksize=chunk))
    else:
        _init_worker(str(source_dir), str(out_dir), plan, seed)
        results = [_run_task(task) for task in schedule]

    by_stem = {rec["stem"]: rec for rec in results}
    ordered = [by_stem[stem] for stem in out_stems]
    failures = tuple((rec["stem"], rec["error"]) for rec in ordered if rec["kind"] == "error")
    records = tuple(rec for rec in ordered if rec["kind"] == "record")

    header = {"kind": "header", "schema": MANIFEST_SCHEMA_VERSION,
              "engine_version": __version__, "rng_convention": CONVENTION,
              "master_seed": seed, "plan_hash": plan_hash(plan),
              "mode": plan.mode, "include_originals": plan.include_originals,
              "source_count": len(stems), "record_count": len(records)}
    manifest = Manifest(header=header, records=records)
    manifest_path = out_dir / MANIFEST_NAME
    manifest.save(manifest_path)
    for stem, message in failures:
        log.error("failed output %s: %s", stem, message)
    return ExpandResult(manifest=manifest, manifest_path=manifest_path, failures=failures)


def _replay_steps(record: dict) -> list[tuple[int, dict[str, object], str]]:
    """(entry index, resolved params, transform name) per step of a record."""
    if record["transform"] == "chain":
        return [(i, step["params"], step["transform"]) for i, step in enumerate(record["params"])]
    return [(record["entry"], record["params"], record["transform"])]


def replay(manifest: Manifest, record: dict, source_dir) -> Sample:
    """Regenerate a record's output from its source and recorded parameters.

    Internal draws (noise fields, crop offsets) are reproduced by
    re-deriving the record's "apply" streams; the resolution draws are
    skipped because the resolved values are taken from the record.
    """
    if manifest.header.get("engine_version") != __version__ or \
            manifest.header.get("rng_convention") != CONVENTION:
        log.warning("manifest engine %s/%s differs from current %s/%s; replay may not be bit-exact",
                    manifest.header.get("engine_version"), manifest.header.get("rng_convention"),
                    __version__, CONVENTION)
    sample = load_sample(source_dir, record["source_id"])
    if record["transform"] == "original":
        return sample
    seed = int(manifest.header["master_seed"])
    out = sample
    for entry_idx, params, name in _replay_steps(record):
        stream = derive_stream(SeedSpec(seed, sample.id, entry_idx, record["replicate"], role="apply"))
        out = apply_transform(out, name, dict(params), stream)
    return out


def verify_record(manifest: Manifest, record: dict, source_dir) -> dict[str, bool]:
    """Re-encode a replayed record and compare checksums plane by plane."""
    sample = replay(manifest, record, source_dir)
    planes = {"image": sample.image, "vessels": sample.vessels}
    if sample.fov is not None:
        planes["fov"] = sample.fov
    outcome = {}
    for key, expected in record["sha256"].items():
        if expected is None:
            outcome[key] = key not in planes
            continue
        actual = hashlib.sha256(encode_png(planes[key])).hexdigest() if key in planes else None
        outcome[key] = actual == expected
    return outcome
