"""Deterministic RNG substreams derived from one global seed."""

from __future__ import annotations

import hashlib

import numpy as np


def substream(seed: int, *tags) -> np.random.Generator:
    """Return the random generator for the (seed, *tags) stream.

    Different tag tuples give statistically independent streams; the same
    (seed, tags) pair always yields the same stream, no matter in which
    order streams are created. Tags are stringified, so ints and strings
    may be mixed freely.
    """
    text = "/".join(str(t) for t in tags)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    # 128 bits of the digest as the spawn key; the seed stays the entropy root.
    key = tuple(int.from_bytes(digest[i:i + 4], "big") for i in range(0, 16, 4))
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))
