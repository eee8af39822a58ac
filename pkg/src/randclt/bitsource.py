"""Deterministic, resettable bit streams.

Every stream tracks ``position`` (bits emitted so far) and supports three
reads: ``next_bits`` (the bits themselves, one uint8 per bit),
``popcount_block`` (number of ones in the next block) and ``block_sums``
(popcounts of many consecutive blocks at once, which is what the samplers use).

Source descriptors are written ``kind:params``::

    prng:seed=7        counter-based SplitMix64 words, MSB first
    constant:1         every bit equal to the given bit
    periodic:0110      the pattern repeated forever
    champernowne       binary numerals of 1, 2, 3, ... concatenated
    file-ascii:PATH    '0'/'1' characters, whitespace ignored
    file-raw:PATH      raw bytes, most significant bit first
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from randclt import _kernels
from randclt.errors import ConfigError, SourceExhausted

PRNG_ID = "splitmix64-weyl-msb/v1"

KINDS = ("prng", "file-ascii", "file-raw", "constant", "periodic", "champernowne")

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SourceSpec:
    kind: str
    seed: Optional[int] = None
    pattern: Optional[str] = None
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown source kind {self.kind!r}")
        if self.kind == "prng":
            if self.seed is None or not 0 <= self.seed <= _MASK64:
                raise ConfigError("prng source needs a seed in [0, 2**64)")
        elif self.kind in ("constant", "periodic"):
            pat = self.pattern or ""
            if not pat or set(pat) - {"0", "1"}:
                raise ConfigError(f"{self.kind} source needs a non-empty 0/1 pattern")
            if self.kind == "constant" and len(pat) != 1:
                raise ConfigError("constant source takes a single bit")
        elif self.kind.startswith("file-") and not self.path:
            raise ConfigError(f"{self.kind} source needs a path")

    @classmethod
    def parse(cls, text: str) -> "SourceSpec":
        kind, _, rest = text.partition(":")
        kind = kind.strip()
        if kind == "prng":
            key, eq, value = rest.partition("=")
            if not eq:
                key, value = "seed", key
            if key != "seed":
                raise ConfigError(f"bad prng parameter {rest!r}")
            try:
                seed = int(value, 0)
            except ValueError:
                raise ConfigError(f"bad prng seed {value!r}") from None
            return cls("prng", seed=seed)
        if kind in ("constant", "periodic"):
            return cls(kind, pattern=rest)
        if kind == "champernowne":
            if rest:
                raise ConfigError("champernowne takes no parameters")
            return cls(kind)
        if kind in ("file-ascii", "file-raw"):
            return cls(kind, path=rest)
        raise ConfigError(f"unknown source {text!r}")

    def with_seed(self, seed: int) -> "SourceSpec":
        if self.kind != "prng":
            raise ConfigError("only prng sources take a seed")
        return SourceSpec("prng", seed=seed)

    def __str__(self):
        if self.kind == "prng":
            return f"prng:seed={self.seed}"
        if self.kind in ("constant", "periodic"):
            return f"{self.kind}:{self.pattern}"
        if self.kind == "champernowne":
            return "champernowne"
        return f"{self.kind}:{self.path}"


class BitStream:
    """Base class; subclasses fill in the three ``_`` hooks."""

    def __init__(self, spec: SourceSpec):
        self.spec = spec
        self.position = 0

    def reset(self):
        self.position = 0

    def next_bits(self, count: int) -> np.ndarray:
        _check_count(count)
        bits = self._read(count)
        self.position += count
        return bits

    def popcount_block(self, count: int) -> int:
        _check_count(count)
        return int(self.block_sums(np.array([count], dtype=np.int64))[0])

    def block_sums(self, sizes) -> np.ndarray:
        """Popcounts of consecutive blocks of the given sizes.

        On exhaustion nothing is consumed and ``SourceExhausted`` reports how
        many bits were still available.
        """
        sizes = np.asarray(sizes, dtype=np.int64)
        if sizes.size == 0:
            return np.zeros(0, dtype=np.int64)
        if sizes.min() < 1:
            raise ValueError("block sizes must be >= 1")
        out = self._block_sums(sizes)
        self.position += int(sizes.sum())
        return out

    def available(self, count: int) -> int:
        """Bits available from the current position, capped at ``count``."""
        return count

    def _read(self, count):
        raise NotImplementedError

    def _block_sums(self, sizes):
        raise NotImplementedError


def _check_count(count):
    if count < 1:
        raise ValueError("count must be >= 1")


class PRNGStream(BitStream):
    """Counter-based generator; see ``randclt._kernels`` for the recurrence."""

    def __init__(self, spec):
        super().__init__(spec)
        self._seed = np.uint64(spec.seed)

    def words(self, first: int, count: int) -> np.ndarray:
        idx = np.arange(first + 1, first + 1 + count, dtype=np.uint64)
        z = self._seed + idx * _kernels.GAMMA
        z = (z ^ (z >> np.uint64(30))) * _kernels.MUL1
        z = (z ^ (z >> np.uint64(27))) * _kernels.MUL2
        return z ^ (z >> np.uint64(31))

    def _read(self, count):
        first = self.position >> 6
        last = (self.position + count - 1) >> 6
        raw = self.words(first, last - first + 1).astype(">u8").view(np.uint8)
        bits = np.unpackbits(raw)
        off = self.position - 64 * first
        return bits[off:off + count]

    def _block_sums(self, sizes):
        return _kernels.prng_block_sums(self._seed, self.position, sizes)


class PeriodicStream(BitStream):
    """Constant and periodic sources; block sums are closed form."""

    def __init__(self, spec):
        super().__init__(spec)
        self._pattern = np.frombuffer(spec.pattern.encode(), dtype=np.uint8) - ord("0")
        self._prefix = np.concatenate(([0], np.cumsum(self._pattern, dtype=np.int64)))

    def _ones_before(self, pos):
        period = len(self._pattern)
        return (pos // period) * self._prefix[-1] + self._prefix[pos % period]

    def _read(self, count):
        period = len(self._pattern)
        idx = (self.position + np.arange(count, dtype=np.int64)) % period
        return self._pattern[idx]

    def _block_sums(self, sizes):
        ends = self.position + np.cumsum(sizes)
        starts = ends - sizes
        return self._ones_before(ends) - self._ones_before(starts)


class BufferedStream(BitStream):
    """Sources produced chunk by chunk (Champernowne, files)."""

    def __init__(self, spec):
        super().__init__(spec)
        self._start()

    def reset(self):
        super().reset()
        self._start()

    def _start(self):
        self._buf = np.zeros(0, dtype=np.uint8)
        self._done = False

    def _produce(self) -> Optional[np.ndarray]:
        raise NotImplementedError

    def available(self, count):
        while len(self._buf) < count and not self._done:
            chunk = self._produce()
            if chunk is None:
                self._done = True
            elif len(chunk):
                self._buf = np.concatenate((self._buf, chunk))
        return min(count, len(self._buf))

    def _take(self, count):
        have = self.available(count)
        if have < count:
            raise SourceExhausted(count, have, self.position)
        bits, self._buf = self._buf[:count], self._buf[count:]
        return bits

    def _read(self, count):
        return self._take(count).copy()

    def _block_sums(self, sizes):
        bits = self._take(int(sizes.sum()))
        starts = np.concatenate(([0], np.cumsum(sizes)[:-1]))
        return np.add.reduceat(bits.astype(np.int64), starts)


class ChampernowneStream(BufferedStream):
    """Binary Champernowne sequence 1 10 11 100 101 ..."""

    chunk_numbers = 1 << 14

    def _start(self):
        super()._start()
        self._next = 1

    def _produce(self):
        lo = self._next
        self._next += self.chunk_numbers
        text = "".join(format(i, "b") for i in range(lo, self._next))
        return np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0")


class FileStream(BufferedStream):
    chunk_bytes = 1 << 20

    def _start(self):
        super()._start()
        if getattr(self, "_fh", None) is not None:
            self._fh.close()
        try:
            self._fh = open(self.spec.path, "rb")
        except OSError as exc:
            raise ConfigError(f"cannot open {self.spec.path}: {exc}") from None

    def _produce(self):
        data = self._fh.read(self.chunk_bytes)
        if not data:
            self._fh.close()
            return None
        raw = np.frombuffer(data, dtype=np.uint8)
        if self.spec.kind == "file-raw":
            return np.unpackbits(raw)
        keep = (raw == ord("0")) | (raw == ord("1"))
        if not np.all(keep | np.isin(raw, _WHITESPACE)):
            bad = raw[~(keep | np.isin(raw, _WHITESPACE))][0]
            raise ConfigError(f"{self.spec.path}: invalid character {chr(bad)!r} in ascii bit file")
        return raw[keep] - ord("0")


_WHITESPACE = np.frombuffer(b" \t\n\r\x0b\x0c", dtype=np.uint8)


def open_stream(spec) -> BitStream:
    if isinstance(spec, str):
        spec = SourceSpec.parse(spec)
    if spec.kind == "prng":
        return PRNGStream(spec)
    if spec.kind in ("constant", "periodic"):
        return PeriodicStream(spec)
    if spec.kind == "champernowne":
        return ChampernowneStream(spec)
    if not os.path.exists(spec.path):
        raise ConfigError(f"no such file: {spec.path}")
    return FileStream(spec)
