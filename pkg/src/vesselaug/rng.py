"""Deterministic hierarchical random streams.

Every augmented output must be regenerable from (master seed, sample id,
plan entry index, replicate index) alone, independent of worker count or
scheduling order.  Each such derivation path is hashed into the key of a
counter-based Philox generator, so streams never share mutable state and
can be created in any order on any worker.

The draw conventions are pinned so golden files stay valid across
versions (the convention tag below is recorded in every manifest):

* key: first 128 bits (big endian) of SHA-256 over the canonical path
  string ``"<master>|<len(sample_id)>:<sample_id>|<entry>|<replicate>|<role>"``
* uniform in [0, 1): one 64-bit Philox word, top 53 bits, scaled by 2**-53
  (numpy's standard double conversion)
* bounded integer in [lo, hi): ``lo + floor(u * (hi - lo))``, clamped to
  ``hi - 1`` against the floating-point edge
* standard normal: Box-Muller on consecutive uniforms; a request for n
  values consumes ``2 * ceil(n / 2)`` uniforms (first half feeds the
  radius, second half the angle), surplus value discarded
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

# Bump whenever a draw convention above changes; stored in manifests so a
# replay against a mismatched engine can be flagged instead of silently
# producing different pixels.
CONVENTION = "philox-sha256-boxmuller-v1"

_MASTER_SEED_MAX = 2**64


@dataclass(frozen=True)
class SeedSpec:
    """Derivation path identifying one stream under a master seed.

    ``role`` separates the draws used to resolve plan parameters from the
    draws a transform makes internally, so a replay from recorded
    parameters can skip resolution without shifting the stream.
    """

    master_seed: int
    sample_id: str = ""
    entry_index: int = -1
    replicate_index: int = -1
    role: str = "apply"

    def __post_init__(self) -> None:
        if not 0 <= self.master_seed < _MASTER_SEED_MAX:
            raise ValueError(f"master seed must be a 64-bit unsigned integer, got {self.master_seed}")

    def path(self) -> str:
        # Length-prefix the free-form sample id so distinct paths can never
        # collapse to the same string.
        sid = str(self.sample_id)
        return f"{self.master_seed}|{len(sid)}:{sid}|{self.entry_index}|{self.replicate_index}|{self.role}"

    def key(self) -> int:
        digest = hashlib.sha256(self.path().encode("utf-8")).digest()
        return int.from_bytes(digest[:16], "big")


class RandomStream:
    """Value-like random stream; derive one per unit of work, never share."""

    def __init__(self, key: int):
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def uniform(self, size=None) -> float | np.ndarray:
        """Uniform draws in [0, 1)."""
        return self._gen.random(size)

    def uniform_in(self, lo: float, hi: float, size=None) -> float | np.ndarray:
        return lo + self.uniform(size) * (hi - lo)

    def integers(self, lo: int, hi: int, size=None) -> int | np.ndarray:
        """Uniform integers in the half-open range [lo, hi)."""
        if hi <= lo:
            raise ValueError(f"empty integer range [{lo}, {hi})")
        span = hi - lo
        draw = np.floor(self.uniform(size) * span).astype(np.int64)
        draw = np.minimum(draw, span - 1)
        out = lo + draw
        return int(out) if size is None else out

    def normal(self, size=None) -> float | np.ndarray:
        """Standard-normal draws via Box-Muller (see module docstring)."""
        shape = () if size is None else (size if isinstance(size, tuple) else (size,))
        n = int(np.prod(shape)) if shape else 1
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        u1, u2 = u[:pairs], u[pairs:]
        radius = np.sqrt(-2.0 * np.log1p(-u1))  # log1p(-u) = log(1-u), u < 1 so finite
        angle = 2.0 * np.pi * u2
        z = np.empty(2 * pairs)
        z[0::2] = radius * np.cos(angle)
        z[1::2] = radius * np.sin(angle)
        out = z[:n]
        if size is None:
            return float(out[0])
        return out.reshape(shape)

    def choice(self, options):
        """Pick one element, consuming a single uniform."""
        seq = list(options)
        return seq[self.integers(0, len(seq))]


def derive_stream(spec: SeedSpec) -> RandomStream:
    """Create the stream for a derivation path; same spec, same draws, forever."""
    return RandomStream(spec.key())
