import hashlib
from pathlib import Path

import hypothesis
import numpy as np
import pytest

from vesselaug.raster import BinaryMask, ImagePlane, Sample, save_png
from vesselaug.rng import SeedSpec, derive_stream
from vesselaug.synthetic import make_sample

hypothesis.settings.register_profile("ci", max_examples=25, deadline=None)
hypothesis.settings.load_profile("ci")


def checkerboard_sample(width=32, height=32, block=4, with_fov=True, id="checker") -> Sample:
    yy, xx = np.mgrid[0:height, 0:width]
    mask = (((yy // block) + (xx // block)) % 2).astype(np.uint8)
    img = np.stack([xx / max(width - 1, 1), yy / max(height - 1, 1),
                    ((xx + yy) % 7) / 6.0], axis=-1)
    fov = BinaryMask(np.ones((height, width), dtype=np.uint8)) if with_fov else None
    return Sample(image=ImagePlane(img), vessels=BinaryMask(mask), fov=fov, id=id)


def write_source_tree(root: Path, count: int, width: int, height: int, with_fov=True, seed=7) -> Path:
    """Synthetic source dataset in the images/masks/fov layout."""
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(exist_ok=True)
    if with_fov:
        (root / "fov").mkdir(exist_ok=True)
    for i in range(count):
        stem = f"s{i:02d}"
        sample = make_sample(width, height, derive_stream(SeedSpec(seed, stem)), id=stem)
        save_png(sample.image, root / "images" / f"{stem}.png")
        save_png(sample.vessels, root / "masks" / f"{stem}.png")
        if with_fov:
            save_png(sample.fov, root / "fov" / f"{stem}.png")
    return root


def tree_digest(root: Path) -> str:
    """Order-independent digest of every file under root (paths + bytes)."""
    h = hashlib.sha256()
    for path in sorted(p for p in Path(root).rglob("*") if p.is_file()):
        h.update(str(path.relative_to(root)).encode())
        h.update(path.read_bytes())
    return h.hexdigest()


@pytest.fixture
def small_sample():
    return make_sample(48, 40, derive_stream(SeedSpec(11, "fixture")), id="fixture")
