"""Deterministic randomness helpers.

Two kinds of streams are used. Plain sequential draws come from
``np.random.default_rng(seed)``. Sampling that must be reproducible
independently of evaluation order (per-face surface samples, per-edge
resampling) is derived from *keys* via a vectorized splitmix64-style hash, so
the same (seed, key, counter) always yields the same value no matter how work
is batched or parallelized.
"""
from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=np.uint64)
    h = (h ^ (h >> np.uint64(30))) * _M1
    h = (h ^ (h >> np.uint64(27))) * _M2
    return h ^ (h >> np.uint64(31))


def keyed_hash(seed: int, *keys) -> np.ndarray:
    """Combine integer key arrays into a well-mixed uint64 per element."""
    with np.errstate(over="ignore"):
        h = _mix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GAMMA)
        for k in keys:
            k = np.asarray(k).astype(np.uint64)
            h = _mix(h ^ (k + _GAMMA))
    return h


def keyed_uniforms(seed: int, *keys) -> np.ndarray:
    """Uniform [0, 1) floats keyed by integer arrays (broadcast together)."""
    h = keyed_hash(seed, *keys)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def random_rotation(seed: int) -> np.ndarray:
    """Uniform random rotation matrix (Haar measure on SO(3)) via quaternion."""
    rng = np.random.default_rng(seed)
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
