"""Effective tail bounds for the strong law and the test-level schedule M(n, l).

For independent variables with variances sigma_k^2, the maximal inequality
with N -> infinity gives::

    P(sup_{k >= M} |mean_k - mu| > eps)
        <= 4 / eps^2 * (M^-2 * sum_{k<=M} sigma_k^2 + D_{M+1}),
    D_j = sum_{k >= j} sigma_k^2 / k^2.

The infinite tail D_{M+1} is only known as an interval; the upper end is
used wherever a valid bound is needed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from randclt import moments
from randclt.sampling import sample_run

GIVE_UP = 1 << 63


@dataclass(frozen=True)
class VarianceSpec:
    """Variances sigma_k^2, either one constant or an explicit table.

    Beyond the end of a table the variances are only assumed bounded by the
    table maximum, which is what the tail interval then uses.
    """

    kind: str = "constant"
    value: float = 1.0
    table: tuple = ()

    def __post_init__(self):
        if self.kind == "constant":
            if not self.value >= 0:
                raise ValueError("variance must be >= 0")
        elif self.kind == "table":
            if not self.table or min(self.table) < 0:
                raise ValueError("variance table must be non-empty and >= 0")
        else:
            raise ValueError(f"unknown variance kind {self.kind!r}")

    @classmethod
    def constant(cls, value):
        return cls("constant", value=value)

    @classmethod
    def from_table(cls, values):
        return cls("table", table=tuple(float(v) for v in values))

    def head_sum(self, M: int):
        """Upper bound on sum_{k<=M} sigma_k^2."""
        if self.kind == "constant":
            return Fraction(self.value) * M
        t = self.table
        if M <= len(t):
            return math.fsum(t[:M])
        return math.fsum(t) + max(t) * (M - len(t))

    def tail_interval(self, M: int):
        """Interval containing D_{M+1} = sum_{k>M} sigma_k^2 / k^2."""
        if self.kind == "constant":
            s = Fraction(self.value)
            return s / (M + 1), s / M
        t = self.table
        T = len(t)
        sup = max(t)
        if M >= T:
            return 0.0, sup / M
        ks = np.arange(M + 1, T + 1, dtype=float)
        known = math.fsum((np.asarray(t[M:]) / ks ** 2).tolist())
        return known, known + sup / T


def _bound(spec: VarianceSpec, eps, M):
    if not eps > 0:
        raise ValueError("eps must be > 0")
    if M < 1:
        raise ValueError("M must be >= 1")
    eps = Fraction(eps) if spec.kind == "constant" else eps
    _, tail_hi = spec.tail_interval(M)
    return 4 / eps ** 2 * (spec.head_sum(M) / M ** 2 + tail_hi)


def tail_bound(spec: VarianceSpec, eps: float, M: int) -> float:
    """Upper bound on P(sup_{k>=M} |mean_k - mu| > eps)."""
    return float(_bound(spec, eps, M))


def find_M(spec: VarianceSpec, n: int, l: int) -> int:
    """Smallest power of two M with tail_bound(spec, 2^-l, M) < 2^-(n+l)."""
    if n < 1 or l < 1:
        raise ValueError("levels n and l must be >= 1")
    eps = Fraction(1, 2 ** l)
    threshold = Fraction(1, 2 ** (n + l))
    M = 1
    while M <= GIVE_UP:
        if _bound(spec, eps, M) < threshold:
            return M
        M *= 2
    raise RuntimeError(f"find_M gave up: no M <= 2^63 for n={n}, l={l}")


@dataclass(frozen=True)
class PlanRow:
    l: int
    eps: float
    M: int
    bound: float
    threshold: float


@dataclass
class TestPlan:
    level: int
    rows: list = field(default_factory=list)

    __test__ = False  # not a pytest class

    @property
    def truncation(self) -> float:
        """Measure allowance for the levels l > l_max that were not built."""
        return 2.0 ** -(self.level + len(self.rows))

    @property
    def total_measure_bound(self) -> float:
        return math.fsum([r.threshold for r in self.rows] + [self.truncation])

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["l", "eps", "M", "bound", "threshold"])
        for r in self.rows:
            w.writerow([r.l, f"{r.eps:.12g}", r.M, f"{r.bound:.12g}", f"{r.threshold:.12g}"])


def build_test_plan(spec: VarianceSpec, n: int, l_max: int) -> TestPlan:
    if l_max < 1:
        raise ValueError("l_max must be >= 1")
    plan = TestPlan(n)
    for l in range(1, l_max + 1):
        M = find_M(spec, n, l)
        eps = 2.0 ** -l
        plan.rows.append(PlanRow(l, eps, M, tail_bound(spec, eps, M), 2.0 ** -(n + l)))
    return plan


def log_grid(k_max: int, per_decade: int = 10) -> list:
    """Roughly log-spaced integers in [1, k_max], always ending at k_max."""
    top = math.log10(k_max) if k_max > 1 else 0.0
    pts = {int(round(10 ** (j / per_decade))) for j in range(int(top * per_decade) + 1)}
    pts.add(k_max)
    return sorted(p for p in pts if 1 <= p <= k_max)


class CenteredTrace:
    """Running mean of X_i^m - E[X_i^m], recorded at chosen indices."""

    def __init__(self, m: int, emit_at):
        self.m = m
        self.emit = np.asarray(sorted(set(emit_at)), dtype=np.int64)
        self.rows = []
        self._table = moments.MomentTable(m)
        self._mean_table = moments.MomentTable(1)
        self._mu = {}

    def _block_mean(self, n):
        if n not in self._mu:
            self._mu[n] = moments.scaled_block_moment(n, self.m)
        return self._mu[n]

    def consume(self, batch):
        mus = np.array([self._block_mean(int(n)) for n in batch.block_size])
        first, last = batch.index[0], batch.index[-1]
        cuts = self.emit[(self.emit >= first) & (self.emit <= last)]
        done = 0
        for k in cuts:
            upto = int(k - first) + 1
            self._take(batch.value[done:upto], mus[done:upto])
            done = upto
            avg = self._table.power_sum(self.m) / k
            mu_bar = self._mean_table.power_sum(1) / k
            self.rows.append((int(k), avg - mu_bar))
        self._take(batch.value[done:], mus[done:])

    def _take(self, values, mus):
        self._table.observe_many(values)
        self._mean_table.observe_many(mus)

    def result(self):
        return self.rows


def centered_average_trace(stream, scheme, m: int, k_max: int, emit_at: Optional[list] = None):
    """[(k, mean_{i<=k} X_i^m - mean_{i<=k} mu_i)] at log-spaced k."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if not 1 <= m <= moments.MAX_ORDER:
        raise ValueError("power m out of range")
    trace = CenteredTrace(m, emit_at if emit_at is not None else log_grid(k_max))
    sample_run(stream, scheme, k_max, [trace])
    return trace.rows
