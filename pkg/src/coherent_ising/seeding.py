"""Counter-based seed derivation.

Child seeds are a pure function of ``(master, index, ...)`` so that work can be
split across workers in any order without changing results.  The mixer is
SplitMix64; the scalar and vectorised versions agree bit for bit.
"""

from __future__ import annotations

import secrets

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def derive_seed(master: int, *indices: int) -> int:
    """Return a 64-bit child seed for ``master`` and a path of stream indices."""
    z = _mix(int(master) & _MASK)
    for idx in indices:
        z = _mix(z ^ (int(idx) & _MASK))
    return z


def derive_seeds(master: int, indices) -> np.ndarray:
    """Vectorised ``derive_seed(master, i)`` over an array of indices (uint64)."""
    base = np.uint64(_mix(int(master) & _MASK))
    z = np.asarray(indices, dtype=np.uint64) ^ base
    with np.errstate(over="ignore"):
        z = z + np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def unit_interval(seed: int) -> float:
    """Map a seed to a float in [0, 1) with 53 random bits."""
    return (_mix(int(seed) & _MASK) >> 11) * 2.0**-53


def unit_interval_array(seeds: np.ndarray) -> np.ndarray:
    z = np.asarray(seeds, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z + np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


def fresh_seed() -> int:
    """Seed for callers that did not supply one; always report it back."""
    return secrets.randbits(63)
