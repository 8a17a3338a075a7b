"""Shared helpers: named RNG substreams and worker-count control."""

from __future__ import annotations

import os
import zlib

import numpy as np


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator derived from one global seed and a stream name.

    Stream names let callers vary one source of randomness (e.g. word
    dropout) without disturbing the others.  The derivation is stable
    across runs and platforms (crc32 of the name, not Python's salted
    hash).
    """
    tag = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))


def as_generator(rng: np.random.Generator | int | None) -> np.random.Generator:
    """Accept a Generator, an integer seed, or None (fresh entropy)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def worker_count() -> int:
    """Cap for parallel per-sentence jobs; SENTVAE_THREADS overrides."""
    env = os.environ.get("SENTVAE_THREADS")
    if env is not None and env.strip():
        n = int(env)
        if n < 1:
            raise ValueError(f"SENTVAE_THREADS must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1
