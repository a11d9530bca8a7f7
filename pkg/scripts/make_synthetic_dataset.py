#!/usr/bin/env python3
"""Generate a synthetic fundus-style dataset in the images/masks/fov layout."""

import argparse
from pathlib import Path

from vesselaug.raster import save_png
from vesselaug.rng import SeedSpec, derive_stream
from vesselaug.synthetic import make_sample


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output dataset directory")
    parser.add_argument("--count", type=int, default=20)
    parser.add_argument("--width", type=int, default=565)
    parser.add_argument("--height", type=int, default=584)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--no-fov", action="store_true")
    args = parser.parse_args()

    root = Path(args.out)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(exist_ok=True)
    if not args.no_fov:
        (root / "fov").mkdir(exist_ok=True)
    for i in range(args.count):
        stem = f"synth_{i:02d}"
        sample = make_sample(args.width, args.height, derive_stream(SeedSpec(args.seed, stem)),
                             with_fov=not args.no_fov, id=stem)
        save_png(sample.image, root / "images" / f"{stem}.png")
        save_png(sample.vessels, root / "masks" / f"{stem}.png")
        if sample.fov is not None:
            save_png(sample.fov, root / "fov" / f"{stem}.png")
    print(f"wrote {args.count} samples under {root}")


if __name__ == "__main__":
    main()
