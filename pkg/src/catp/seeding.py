"""Deterministic fan-out of one master seed into per-component random streams.

Each component draws from ``SeedSequence(master, spawn_key=(stream_id, *extra))``
so varying one component's settings never perturbs another's random numbers.
"""
from __future__ import annotations

import numpy as np

STREAMS = {"shadowing": 1, "fading": 2, "solver": 3, "mc": 4, "a2g": 5}


def stream_seed(master: int, name: str, *extra: int) -> np.random.SeedSequence:
    if name not in STREAMS:
        raise KeyError(f"unknown random stream {name!r}; known: {sorted(STREAMS)}")
    return np.random.SeedSequence(int(master), spawn_key=(STREAMS[name], *map(int, extra)))


def stream_rng(master: int, name: str, *extra: int) -> np.random.Generator:
    return np.random.default_rng(stream_seed(master, name, *extra))


def as_rng(rng_or_seed) -> np.random.Generator:
    if isinstance(rng_or_seed, np.random.Generator):
        return rng_or_seed
    return np.random.default_rng(rng_or_seed)
