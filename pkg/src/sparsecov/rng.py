"""Counter-based random streams.

Every random quantity used by the algorithms is addressed by a key tuple
(master seed, stream id, ...) plus a counter, so values never depend on the
order in which they are requested. Gaussian streams are built on numpy's
Philox4x64 generator: counter block ``j`` of stream ``(seed, stream)``
yields the ``j``-th normal variate via Box-Muller.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_TWO_NEG_53 = 2.0 ** -53


def _philox(seed: int, stream: int) -> np.random.Philox:
    key = (int(seed) & _MASK64) | ((int(stream) & _MASK64) << 64)
    return np.random.Philox(key=key)


def _unit_interval(raw: np.ndarray) -> np.ndarray:
    # 53 high bits mapped to the open interval (0, 1)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_NEG_53


def gaussian_stream(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """Standard normal variates for counters ``start .. start+count-1``.

    The result for a given counter is identical whatever ``start`` and
    ``count`` are used to request it.
    """
    if count < 0 or start < 0:
        raise ValueError("start and count must be non-negative")
    bitgen = _philox(seed, stream)
    if start:
        bitgen.advance(start)
    raw = bitgen.random_raw(4 * count).reshape(count, 4)
    u1 = _unit_interval(raw[:, 0])
    u2 = _unit_interval(raw[:, 1])
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def keyed_generator(*keys: int) -> np.random.Generator:
    """A numpy Generator determined entirely by the integer key tuple."""
    return np.random.default_rng(np.random.SeedSequence([int(k) & _MASK64 for k in keys]))
