"""Deterministic random-number streams.

Every sampling operation in the package takes an explicit generator, and
pipelines that fan out over repetitions derive one independent substream per
repetition index.  Streams are built on the counter-based Philox bit
generator, so a (seed, index path) pair always denotes the same stream
regardless of execution order or worker count.
"""

from __future__ import annotations

import numpy as np

# Substream namespaces: first path element of every derived stream, so the
# pipelines never share random numbers even under one run seed.
NS_DATASET = 0
NS_KS = 1
NS_AFFINITY = 2
NS_TIMETAG = 3


def make_rng(seed: int) -> np.random.Generator:
    """Root generator for a run seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def substream(seed: int, *path: int) -> np.random.Generator:
    """Generator for a fixed substream of the run seed.

    The path is an integer tuple, e.g. (namespace, repetition_index).  Equal
    (seed, path) pairs yield identical streams; unequal paths yield streams
    that are independent for all practical purposes.
    """
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
