"""Deterministic random substreams.

Every stochastic routine in the package takes either a seed or a
``numpy.random.Generator``.  Work that can be split (replicates, draw
chunks, outer Monte Carlo loops) derives one child stream per unit of
work from ``SeedSequence(seed, spawn_key=keys)``, so results never depend
on how many workers process the units or in which order.
"""

from __future__ import annotations

import zlib

import numpy as np



def substream(seed: int, *keys: int | str) -> np.random.Generator:
    """Return the generator for ``(seed, *keys)``.

    String keys (method names, labels) are hashed with CRC32 so the key
    tuple stays integer-valued and stable across Python processes.
    """
    spawn_key = tuple(zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in keys)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=spawn_key)))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def child_seed(rng) -> int:
    """Draw an integer seed from ``rng`` (used to hand a seed to substream users)."""
    return int(as_generator(rng).integers(0, 2**63 - 1))
