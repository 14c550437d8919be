"""Deterministic random-stream derivation.

One master seed drives an entire run.  Every consumer derives its own
independent stream by labelled splitting, so results never depend on the
order in which unrelated components draw randomness, nor on how sampling
work is chunked across workers.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_words(label: object) -> list[int]:
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def seed_sequence(master_seed: int, *labels: object) -> np.random.SeedSequence:
    """Build a SeedSequence for (master_seed, labels); stable across runs."""
    entropy = [int(master_seed) & 0xFFFFFFFF, (int(master_seed) >> 32) & 0xFFFFFFFF]
    for label in labels:
        entropy.extend(_label_words(label))
    return np.random.SeedSequence(entropy)


def spawn_rng(master_seed: int, *labels: object) -> np.random.Generator:
    """Independent Generator for the given master seed and split labels."""
    return np.random.default_rng(seed_sequence(master_seed, *labels))


def stream_base(rng: np.random.Generator) -> np.uint64:
    """Draw a 64-bit base from `rng` for counter-based per-sample streams.

    Sampling kernels derive the stream of sample ``j`` purely from
    ``(base, j)``, which makes results independent of chunking and of the
    number of workers.
    """
    return np.uint64(rng.integers(0, 2**64, dtype=np.uint64))
