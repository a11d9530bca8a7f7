#!/usr/bin/env python3
"""Benchmark the paper-default plan on DRIVE-sized synthetic sources."""

import argparse
import os
import tempfile
import time
from pathlib import Path

from vesselaug.pipeline import expand_dataset
from vesselaug.plan import default_paper_plan
from vesselaug.raster import save_png
from vesselaug.rng import SeedSpec, derive_stream
from vesselaug.synthetic import make_sample


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sources", type=int, default=20)
    parser.add_argument("--threads", type=int, default=min(8, os.cpu_count() or 1))
    parser.add_argument("--width", type=int, default=565)
    parser.add_argument("--height", type=int, default=584)
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as td:
        src = Path(td) / "src"
        (src / "images").mkdir(parents=True)
        (src / "masks").mkdir()
        (src / "fov").mkdir()
        for i in range(args.sources):
            stem = f"s{i:02d}"
            sample = make_sample(args.width, args.height, derive_stream(SeedSpec(7, stem)), id=stem)
            save_png(sample.image, src / "images" / f"{stem}.png")
            save_png(sample.vessels, src / "masks" / f"{stem}.png")
            save_png(sample.fov, src / "fov" / f"{stem}.png")

        plan = default_paper_plan()
        t0 = time.time()
        result = expand_dataset(src, plan, Path(td) / "out", threads=args.threads, master_seed=42)
        elapsed = time.time() - t0
        n = len(result.manifest.records)
        print(f"{n} outputs at {args.width}x{args.height} in {elapsed:.1f}s "
              f"({n / elapsed:.1f}/s) on {args.threads} workers, {len(result.failures)} failures")


if __name__ == "__main__":
    main()
