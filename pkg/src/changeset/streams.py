"""Deterministic random-stream derivation.

Every stochastic routine takes an explicit ``numpy.random.Generator``.
Experiments derive one independent stream per (replication, purpose) pair
from a single root seed, so replications can run in any order or in
parallel and still produce byte-identical results.
"""

from __future__ import annotations

import numpy as np

# Fixed purpose labels for sub-streams within one replication.
CHANGESET = 0
OBSERVATION = 1
QLAYERS = 2
ORACLE = 3


def substream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the sub-stream addressed by ``key`` under ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def replication_stream(seed: int, replication: int, purpose: int) -> np.random.Generator:
    """Per-replication, per-purpose stream (replication index is the key)."""
    return substream(seed, replication, purpose)
