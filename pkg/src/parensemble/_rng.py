"""Seeded randomness shared by the data split, subsampling and forest schedule.

Everything goes through PCG64 so that splits and forests reproduce across
platforms and numpy versions.
"""
from __future__ import annotations

import numpy as np


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def permutation(n: int, seed: int) -> np.ndarray:
    """Stable argsort of n uniform draws from PCG64(seed)."""
    keys = generator(seed).random(n)
    return np.argsort(keys, kind="stable")


def mix(seed: int, index: int) -> int:
    """Derive an independent 64-bit seed for stream ``index`` of ``seed``."""
    state = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, index]).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)
