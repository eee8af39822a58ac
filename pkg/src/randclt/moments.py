"""Normal moments, exact moments of Rademacher sums, streaming moment tables.

The exact moment of ``S_n = r_1 + ... + r_n`` is expanded with the
multinomial theorem.  Only terms where every exponent is even survive, so for
even ``m``::

    E[S_n^m] = sum over partitions p of m/2 of
               multinomial(m; 2p_1, ..., 2p_l) * K(2p, n)

where ``K(2p, n)`` counts the exponent vectors of length ``n`` whose nonzero
entries are exactly ``2p``.  ``brute_force_moment`` enumerates sign vectors
(grouped by their sum) and is the ground truth the expansion is checked
against.
"""

from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction
from typing import Iterator, NamedTuple

import numpy as np

MAX_ORDER = 16
MAX_BRUTE_N = 20


def normal_moment(m: int) -> int:
    """m-th moment of N(0, 1): 0 for odd m, (m-1)!! for even m."""
    if m < 0:
        raise ValueError("moment order must be >= 0")
    if m % 2:
        return 0
    return math.prod(range(m - 1, 0, -2))


def partitions(total: int) -> Iterator[tuple]:
    """Partitions of ``total`` as non-increasing tuples, largest first part first."""
    if total < 0:
        raise ValueError("cannot partition a negative integer")
    if total == 0:
        yield ()
        return

    def rec(remaining, cap):
        if remaining == 0:
            yield ()
            return
        for first in range(min(remaining, cap), 0, -1):
            for rest in rec(remaining - first, first):
                yield (first,) + rest

    yield from rec(total, total)


def multinomial(total: int, parts) -> int:
    if sum(parts) != total:
        raise ValueError("parts must sum to total")
    out = 1
    done = 0
    for p in parts:
        done += p
        out *= math.comb(done, p)
    return out


def falling_factorial(n: int, l: int) -> int:
    return math.prod(range(n - l + 1, n + 1)) if l <= n else 0


def placement_count(parts, n: int) -> int:
    """Ways to place the multiset ``parts`` into n ordered slots, rest zero.

    Equals n! / ((n - l)! * prod(mult_j!)) with l = len(parts).
    """
    l = len(parts)
    if l > n:
        return 0
    denom = math.prod(math.factorial(c) for c in Counter(parts).values())
    return falling_factorial(n, l) // denom


class PartitionTerm(NamedTuple):
    half_parts: tuple      # partition of m/2
    multinomial: int       # multinomial(m; 2p_1, ..., 2p_l)
    placements: int        # K(2p, n)

    @property
    def length(self):
        return len(self.half_parts)

    @property
    def value(self):
        return self.multinomial * self.placements


def _check_order(m):
    if m < 0:
        raise ValueError("moment order must be >= 0")
    if m > MAX_ORDER:
        raise ValueError(f"moment order {m} out of range (max {MAX_ORDER})")


def partition_terms(n: int, m: int) -> list:
    """The surviving terms of the multinomial expansion of E[S_n^m] (m even)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_order(m)
    if m % 2:
        return []
    terms = []
    for p in partitions(m // 2):
        doubled = tuple(2 * k for k in p)
        terms.append(PartitionTerm(p, multinomial(m, doubled), placement_count(doubled, n)))
    return terms


def exact_rademacher_moment(n: int, m: int) -> int:
    """E[(r_1 + ... + r_n)^m] as an exact integer."""
    return sum(t.value for t in partition_terms(n, m))


def brute_force_moment(n: int, m: int) -> int:
    """E[S_n^m] by enumerating all 2^n sign vectors, grouped by their sum.

    There are C(n, j) vectors with j plus-signs, each with S = 2j - n.
    """
    if n < 1 or n > MAX_BRUTE_N:
        raise ValueError(f"brute force needs 1 <= n <= {MAX_BRUTE_N}")
    _check_order(m)
    total = sum(math.comb(n, j) * (2 * j - n) ** m for j in range(n + 1))
    q, r = divmod(total, 2 ** n)
    if r:
        raise ArithmeticError(f"enumeration sum not divisible by 2^{n}")
    return q


def scaled_block_moment_exact(n: int, m: int) -> Fraction:
    """E[X^m] as a fraction (even m only; odd moments are 0)."""
    exact = exact_rademacher_moment(n, m)
    if m % 2:
        return Fraction(0)
    return Fraction(exact, n ** (m // 2))


def scaled_block_moment(n: int, m: int) -> float:
    """E[X^m] for one block of n bits, X = S_n / sqrt(n)."""
    return float(scaled_block_moment_exact(n, m))


def powers(x: np.ndarray, m_max: int) -> list:
    """[x^0, x^1, ..., x^m_max], each built from two lower powers."""
    out = [np.ones_like(x), x]
    for m in range(2, m_max + 1):
        out.append(out[m // 2] * out[m - m // 2])
    return out[: m_max + 1]


class MomentTable:
    """Running sums of X^m, m = 1..m_max, with error-compensated addition.

    Each batch is summed exactly rounded (``math.fsum``); batch totals are
    folded into a (sum, compensation) pair with Neumaier's update.
    """

    def __init__(self, m_max: int = 8):
        if m_max < 1:
            raise ValueError("m_max must be >= 1")
        self.m_max = m_max
        self.count = 0
        self._sum = [0.0] * (m_max + 1)
        self._comp = [0.0] * (m_max + 1)

    def _add(self, m, value):
        s = self._sum[m]
        t = s + value
        if abs(s) >= abs(value):
            self._comp[m] += (s - t) + value
        else:
            self._comp[m] += (value - t) + s
        self._sum[m] = t

    def observe(self, x: float):
        self.observe_many(np.array([x], dtype=float))

    def observe_many(self, xs):
        xs = np.asarray(xs, dtype=float)
        if xs.size == 0:
            return
        pw = powers(xs, self.m_max)
        for m in range(1, self.m_max + 1):
            self._add(m, math.fsum(pw[m].tolist()))
        self.count += xs.size

    def consume(self, batch):
        self.observe_many(batch.value)

    def power_sum(self, m: int) -> float:
        return self._sum[m] + self._comp[m]

    def empirical_moment(self, m: int) -> float:
        if self.count == 0:
            raise ValueError("no samples observed yet")
        if m == 0:
            return 1.0
        if not 1 <= m <= self.m_max:
            raise ValueError(f"moment order {m} not tracked (m_max={self.m_max})")
        return self.power_sum(m) / self.count

    def merge(self, other: "MomentTable") -> "MomentTable":
        if other.m_max != self.m_max:
            raise ValueError("cannot merge tables with different m_max")
        out = MomentTable(self.m_max)
        out.count = self.count + other.count
        for m in range(1, self.m_max + 1):
            for part in (self._sum[m], self._comp[m], other._sum[m], other._comp[m]):
                out._add(m, part)
        return out

    def result(self):
        return {m: self.empirical_moment(m) for m in range(1, self.m_max + 1)}
