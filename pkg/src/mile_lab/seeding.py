"""Deterministic RNG streams derived from a master seed plus string/int tags.

Every stochastic component takes its Generator from :func:`rng_for` so that
runs are reproducible and independent components never share a stream.
"""

from __future__ import annotations

import zlib

import numpy as np


def rng_for(seed: int, *tags: str | int) -> np.random.Generator:
    entropy = [int(seed) & 0xFFFFFFFF]
    for tag in tags:
        if isinstance(tag, str):
            entropy.append(zlib.crc32(tag.encode("utf-8")))
        else:
            entropy.append(int(tag) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(entropy))
