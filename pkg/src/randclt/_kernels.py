"""Numba kernels for the counter-based PRNG.

Word ``i`` (0-based) of a stream with seed ``s`` is::

    z = (s + (i + 1) * 0x9E3779B97F4A7C15) mod 2**64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
    word = z ^ (z >> 31)

i.e. the SplitMix64 output function applied to a Weyl sequence.  Bits are
emitted most-significant first within each word.
"""

import numba
import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
MUL1 = np.uint64(0xBF58476D1CE4E5B9)
MUL2 = np.uint64(0x94D049BB133111EB)

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


@numba.njit(inline="always")
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * MUL1
    z = (z ^ (z >> np.uint64(27))) * MUL2
    return z ^ (z >> np.uint64(31))


@numba.njit(inline="always")
def _popcount(x):
    x = x - ((x >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return (x * _H01) >> np.uint64(56)


@numba.njit(nogil=True, cache=True)
def prng_block_sums(seed, start, sizes):
    """Popcounts of consecutive blocks beginning at bit offset ``start``."""
    out = np.empty(sizes.shape[0], np.int64)
    pos = start
    for b in range(sizes.shape[0]):
        end = pos + sizes[b]
        total = 0
        w = pos >> 6
        wend = (end - 1) >> 6
        while w <= wend:
            word = _mix(seed + np.uint64(w + 1) * GAMMA)
            base = w * 64
            lo = max(pos, base) - base
            hi = min(end, base + 64) - base
            width = hi - lo
            if width < 64:
                word = (word << np.uint64(lo)) >> np.uint64(64 - width)
            total += _popcount(word)
            w += 1
        out[b] = total
        pos = end
    return out
