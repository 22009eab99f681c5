"""Splittable counter-based pseudo-random numbers (splitmix64).

All stochastic code in this package draws from splitmix64 streams.  A stream
is identified by a 64-bit state ``seed``; draw ``i`` (1-indexed) of the
stream is ``mix64(seed + i*GOLDEN)``, so streams can be consumed either
sequentially (event loops) or as vectorized counter blocks (sample-path
construction) with identical results.

Substreams are derived with :func:`stream_seed`, the published mixing
function: replication ``r`` of base seed ``b`` uses
``mix64(b ^ mix64((r + 1) * GOLDEN))``, and further keys fold in the same
way.  Distinct keys give statistically independent streams, and results are
reproducible regardless of the order replications execute in.
"""

from __future__ import annotations

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1

# 2**-53: converts the top 53 bits of a 64-bit word to a float in [0, 1)
_U53 = 2.0**-53


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def stream_seed(base_seed: int, *keys: int) -> int:
    """Derive the state of the substream identified by ``keys``."""
    s = base_seed & _MASK
    for k in keys:
        s = mix64(s ^ mix64(((k + 1) * GOLDEN) & _MASK))
    return s


def uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """Draws ``start+1 .. start+count`` of stream ``seed``, in [0, 1).

    Vectorized counter evaluation; ``uniforms(s, 0, n)`` equals the first
    ``n`` sequential outputs of a splitmix64 generator with state ``s``.
    """
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = (np.uint64(seed & _MASK) + idx * np.uint64(GOLDEN)).astype(np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * _U53
