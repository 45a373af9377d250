"""Deterministic random streams built on the Philox counter-based generator.

Every stochastic entry point in this package takes a 64-bit seed and derives
independent child streams from it by key, never by sequential jumping.  Two
streams with different derivation paths are statistically independent, and the
set of streams produced for a run does not depend on thread count or
scheduling order.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    """One round of the splitmix64 mixer (public-domain constants)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_key(seed: int, *path: int) -> tuple[int, int]:
    """Mix a base seed and a derivation path into a 128-bit Philox key.

    The seed occupies one key word untouched; the path is folded into the
    other word with splitmix64 rounds so that distinct paths give distinct,
    well-separated keys.
    """
    h = _splitmix64(seed & _MASK64)
    for p in path:
        h = _splitmix64(h ^ (p & _MASK64))
    return (seed & _MASK64, h)


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return an independent Generator for (seed, path)."""
    key = np.array(derive_key(seed, *path), dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
