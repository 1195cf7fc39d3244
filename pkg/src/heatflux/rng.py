"""Counter-based uniform random numbers.

Every draw is a pure function of ``(master_seed, stream, index, counter)``
hashed with the SplitMix64 finalizer, so any trajectory can be regenerated
on its own and results do not depend on how work is split across workers.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / (1 << 53)
_MASK = (1 << 64) - 1


def mix64(x):
    """SplitMix64 finalizer on uint64 scalars or arrays (wrapping arithmetic)."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = x + _GOLDEN
        x = (x ^ (x >> np.uint64(30))) * _M1
        x = (x ^ (x >> np.uint64(27))) * _M2
        x = x ^ (x >> np.uint64(31))
    return x


def stream_keys(master_seed: int, stream: int, index) -> np.ndarray:
    """Per-trajectory 64-bit keys for trajectory ``index`` of ``stream``."""
    seed_key = mix64(np.uint64(master_seed & _MASK))
    stream_key = mix64(seed_key ^ mix64(np.uint64(stream & _MASK)))
    idx = np.asarray(index, dtype=np.uint64)
    return mix64(stream_key ^ mix64(idx))


def uniforms(keys, counter) -> np.ndarray:
    """Uniform doubles in [0, 1), one per key, at draw number ``counter``."""
    keys = np.asarray(keys, dtype=np.uint64)
    c = np.asarray(counter, dtype=np.uint64)
    with np.errstate(over="ignore"):
        bits = mix64(keys ^ (c * _GOLDEN + _M2))
    return (bits >> np.uint64(11)).astype(np.float64) * _INV_2_53


class CounterStream:
    """Sequential view of one trajectory's counter-based stream."""

    def __init__(self, master_seed: int, stream: int, index: int, counter: int = 0):
        self.key = stream_keys(master_seed, stream, index)
        self.counter = counter

    def random(self) -> float:
        u = float(uniforms(self.key, self.counter))
        self.counter += 1
        return u
