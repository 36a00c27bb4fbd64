"""Deterministic random-stream derivation.

Every run is reproducible from one top-level 64-bit seed. Each consumer
owns a fixed stream id, so adding draws to one consumer never perturbs
another:

    stream 0  training        (0, 0)=init, (0, 1, epoch)=shuffle, (0, 2, epoch)=masks
    stream 1  MC sampling     (1, record_index)
    stream 2  dataset splits  (2, split_index)
    stream 3  synthetic data
    stream 4  per-split train sub-seeds in multi-split evaluation

Streams are numpy ``SeedSequence`` spawn keys, so they are independent and
addressable without consuming each other. Reproducibility is guaranteed
within this implementation, not across numpy major versions.
"""

from __future__ import annotations

import numpy as np

STREAM_TRAIN = 0
STREAM_MC = 1
STREAM_SPLIT = 2
STREAM_SYNTH = 3
STREAM_SUBSEED = 4


def derive_stream(seed: int, *path: int) -> np.random.Generator:
    """Return a fresh generator for the sub-stream ``path`` under ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(path)))


def derive_subseed(seed: int, *path: int) -> int:
    """Derive a dependent 64-bit seed, used to re-root training per split."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(STREAM_SUBSEED, *path))
    state = ss.generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def stream_label(seed: int, *path: int) -> str:
    """Human-readable identifier stored alongside sampled artifacts."""
    return f"{seed}:" + "/".join(str(p) for p in path)
