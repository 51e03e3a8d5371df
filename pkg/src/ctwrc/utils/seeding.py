"""Seeded random streams."""

import numpy as np


def trial_rng(seed: int, *stream: int) -> np.random.Generator:
    """Return an independent generator for (seed, *stream).

    Each (trial, purpose, ...) tuple gets its own Philox stream via the
    SeedSequence spawn key, so results do not depend on the order in which
    trials are executed.

    Args:
        seed: Experiment seed (non-negative).
        *stream: Extra non-negative integers identifying the stream.

    Returns:
        A numpy Generator backed by Philox.
    """
    if seed < 0 or any(s < 0 for s in stream):
        raise ValueError(f"Seeds must be non-negative, got {(seed, *stream)!r}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=stream)))
