"""Seedable randomness plumbing.

Every randomized operation in the toolkit takes an explicit rng so runs
are reproducible under a fixed seed; without a seed a system entropy
source is used.
"""

from __future__ import annotations

import random

__all__ = ["make_rng"]


def make_rng(seed: int | None = None) -> random.Random:
    """Deterministic generator for a given seed, system entropy otherwise."""
    if seed is None:
        return random.SystemRandom()
    return random.Random(seed)
