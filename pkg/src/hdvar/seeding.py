"""Counter-based seed derivation for independent, replayable random streams.

A stream is identified by ``(master_seed, scenario_id, replication_index)``.
The three fields are folded into one 64-bit stream seed with FNV-1a (for the
label) and the SplitMix64 finalizer (for mixing). The stream seed then seeds
a numpy ``PCG64`` bit generator; normal variates come from numpy's ziggurat
sampler (``Generator.standard_normal``), which is exact rather than an
approximation. Because each replication owns its stream, results do not
depend on the order or the worker that evaluates it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
DEFAULT_MASTER_SEED = 20240101

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(label: str) -> int:
    """64-bit FNV-1a hash of the UTF-8 bytes of ``label``."""
    h = _FNV_OFFSET
    for byte in label.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & MASK64
    return h


def splitmix64(x: int) -> int:
    """One SplitMix64 step: golden-ratio increment followed by the finalizer."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, scenario_id: str, replication_index: int) -> int:
    h = splitmix64(master_seed & MASK64)
    h = splitmix64(h ^ fnv1a64(scenario_id))
    return splitmix64(h ^ (replication_index & MASK64))


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    scenario_id: str
    replication_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed <= MASK64:
            raise ValueError(f"master_seed must be an unsigned 64-bit integer, got {self.master_seed}")
        if self.replication_index < 0:
            raise ValueError(f"replication_index must be non-negative, got {self.replication_index}")

    @property
    def stream_seed(self) -> int:
        return derive_seed(self.master_seed, self.scenario_id, self.replication_index)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.stream_seed))

    def child(self, label: str, index: int = 0) -> "SeedSpec":
        """Sub-stream keyed by an extra label, e.g. ``spec.child("design")``."""
        return SeedSpec(self.master_seed, f"{self.scenario_id}/{label}", index)
