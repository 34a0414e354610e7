"""Counter-based random numbers.

Every draw is a pure hash of its labels, so a coefficient at wavenumber k
gets the same value no matter which worker computes it, in which order, or
on which grid. The mixer is the SplitMix64 finalizer.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(x: np.ndarray) -> np.ndarray:
    x = x + _GOLDEN
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def _label(v) -> np.ndarray:
    if isinstance(v, (int, np.integer)):
        return np.atleast_1d(np.uint64(int(v) & _MASK64))
    return np.atleast_1d(np.asarray(v, dtype=np.int64)).view(np.uint64)


def hash_labels(*labels) -> np.ndarray:
    """Hash a sequence of integer labels (scalars or broadcastable arrays)."""
    arrays = np.broadcast_arrays(*[_label(v) for v in labels])
    with np.errstate(over="ignore"):
        h = np.zeros(arrays[0].shape, dtype=np.uint64)
        for a in arrays:
            h = _mix(h ^ a)
    return h


def derive_seed(seed: int, *labels: int) -> int:
    """A 63-bit child seed for a labelled sub-stream."""
    h = hash_labels(seed, *labels)
    return int(h[0]) >> 1


def uniform01(*labels) -> np.ndarray:
    """Uniform samples in (0, 1), one per broadcast label tuple."""
    h = hash_labels(*labels)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def complex_normal(*labels) -> np.ndarray:
    """Standard complex Gaussian (E|z|^2 = 2) via Box-Muller on two draws."""
    u1 = uniform01(*labels, 0)
    u2 = uniform01(*labels, 1)
    r = np.sqrt(-2.0 * np.log(u1))
    return r * np.exp(2j * np.pi * u2)
