"""Block schemes and the sample stream X_1, X_2, ...

Sample k reads the next n(k) bits, counts the ones S and reports
``X_k = (2*S - n(k)) / sqrt(n(k))``.  Indices are 1-based; bit positions in
``block_bounds`` are 1-based as well, so the first block starts at bit 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from randclt.errors import ConfigError, SourceExhausted

MAX_INDEX = (1 << 63) - 1


@dataclass(frozen=True)
class BlockScheme:
    kind: str
    N: Optional[int] = None
    a: int = 1
    b: int = 0

    def __post_init__(self):
        if self.kind == "fixed":
            if self.N is None or self.N < 1:
                raise ConfigError("fixed scheme needs N >= 1")
        elif self.kind == "general":
            if self.a < 1 or self.b < 0:
                raise ConfigError("affine scheme needs a >= 1 and b >= 0")
        elif self.kind != "triangular":
            raise ConfigError(f"unknown scheme kind {self.kind!r}")

    @classmethod
    def triangular(cls):
        return cls("triangular")

    @classmethod
    def fixed(cls, N):
        return cls("fixed", N=N)

    @classmethod
    def affine(cls, a, b=0):
        return cls("general", a=a, b=b)

    @classmethod
    def parse(cls, text: str) -> "BlockScheme":
        parts = text.strip().split(":")
        try:
            if parts == ["tri"]:
                return cls.triangular()
            if parts[0] == "fixed" and len(parts) == 2:
                return cls.fixed(int(parts[1]))
            if parts[0] == "affine" and len(parts) == 3:
                return cls.affine(int(parts[1]), int(parts[2]))
        except ValueError:
            pass
        raise ConfigError(f"bad scheme {text!r} (expected tri, fixed:N or affine:a:b)")

    def __str__(self):
        if self.kind == "triangular":
            return "tri"
        if self.kind == "fixed":
            return f"fixed:{self.N}"
        return f"affine:{self.a}:{self.b}"

    def size(self, k: int) -> int:
        if k < 1:
            raise ValueError("sample index k must be >= 1")
        if self.kind == "triangular":
            return k
        if self.kind == "fixed":
            return self.N
        return self.a * k + self.b

    def sizes(self, k_first: int, k_last: int) -> np.ndarray:
        """n(k) for k = k_first..k_last inclusive."""
        ks = np.arange(k_first, k_last + 1, dtype=np.int64)
        if self.kind == "triangular":
            return ks
        if self.kind == "fixed":
            return np.full(ks.shape, self.N, dtype=np.int64)
        return self.a * ks + self.b

    def bits_before(self, k: int) -> int:
        """Total bits used by samples 1..k-1."""
        j = k - 1
        if self.kind == "triangular":
            return j * (j + 1) // 2
        if self.kind == "fixed":
            return j * self.N
        return self.a * j * (j + 1) // 2 + self.b * j


def block_bounds(scheme: BlockScheme, k: int):
    """(start, size) of sample k's block, start counted from bit 1."""
    if k < 1:
        raise ValueError("sample index k must be >= 1")
    start = scheme.bits_before(k) + 1
    size = scheme.size(k)
    if start + size - 1 > MAX_INDEX:
        raise OverflowError(f"block {k} ends beyond bit index 2**63 - 1")
    return start, size


class Sample(NamedTuple):
    index: int
    value: float
    block_sum: int
    block_size: int


def sample_value(block_sum, block_size):
    return (2 * block_sum - block_size) / math.sqrt(block_size)


def next_sample(stream, scheme: BlockScheme, k: int) -> Sample:
    start, size = block_bounds(scheme, k)
    if stream.position != start - 1:
        raise ValueError(f"stream at bit {stream.position}, sample {k} starts after bit {start - 1}")
    s = stream.popcount_block(size)
    return Sample(k, sample_value(s, size), s, size)


@dataclass
class SampleBatch:
    """Consecutive samples handed to sinks by ``sample_run``."""

    index: np.ndarray
    block_sum: np.ndarray
    block_size: np.ndarray
    value: np.ndarray

    def __len__(self):
        return len(self.index)

    @classmethod
    def from_sums(cls, k_first, sums, sizes):
        index = np.arange(k_first, k_first + len(sums), dtype=np.int64)
        value = (2 * sums - sizes) / np.sqrt(sizes)
        return cls(index, sums, sizes, value)


class ValueCollector:
    """Sink that keeps every sample value (tests and small runs)."""

    def __init__(self):
        self._parts = []

    def consume(self, batch):
        self._parts.append(batch.value.copy())

    def result(self):
        return np.concatenate(self._parts) if self._parts else np.zeros(0)


def sample_run(stream, scheme: BlockScheme, k_max: int, sinks, chunk_bits: int = 1 << 24):
    """Feed X_1..X_{k_max} to every sink in order; return each sink's result.

    Sinks implement ``consume(batch)`` and ``result()``.  The stream must sit
    at the start of block 1.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if stream.position != 0:
        raise ValueError("sample_run needs a stream positioned at bit 0")
    block_bounds(scheme, k_max)
    k = 1
    while k <= k_max:
        k_last = _chunk_end(scheme, k, k_max, chunk_bits)
        sizes = scheme.sizes(k, k_last)
        need = int(sizes.sum())
        have = stream.available(need)
        if have < need:
            fit = int(np.searchsorted(np.cumsum(sizes), have, side="right"))
            if fit:
                _feed(sinks, k, stream.block_sums(sizes[:fit]), sizes[:fit])
            raise SourceExhausted(need, have, stream.position, k_reached=k - 1 + fit)
        _feed(sinks, k, stream.block_sums(sizes), sizes)
        k = k_last + 1
    return [sink.result() for sink in sinks]


def _feed(sinks, k_first, sums, sizes):
    batch = SampleBatch.from_sums(k_first, sums, sizes)
    for sink in sinks:
        sink.consume(batch)


def _chunk_end(scheme, k, k_max, chunk_bits):
    # Largest k_last with total bits in [k, k_last] <= chunk_bits (at least k).
    base = scheme.bits_before(k)
    lo, hi = k, k_max
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if scheme.bits_before(mid + 1) - base <= chunk_bits:
            lo = mid
        else:
            hi = mid - 1
    return lo
