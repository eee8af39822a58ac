"""Almost-sure CLT along a single bit path.

Each bit becomes a sign r_k = 2*w_k - 1, S_k is the running sum and
Y_k = S_k / sqrt(k).  The estimator is a log-weighted path average::

    (1 / normalizer(n)) * sum_{k<=n} weight(k) * I{Y_k <= x}

with either weight 1/k over log n ("harmonic") or d_k = log(1 + 1/k) over
D_n = sum d_k = log(n + 1) ("dk").
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import mpmath
import numpy as np

MAX_EXPECTATION_K = 10 ** 6
MIN_STUDY_SEEDS = 100
MAX_N = (1 << 63) - 1


@dataclass(frozen=True)
class WeightSeq:
    kind: str = "dk"

    def __post_init__(self):
        if self.kind not in ("harmonic", "dk"):
            raise ValueError(f"unknown weight kind {self.kind!r}")

    def weights(self, n: int) -> np.ndarray:
        k = np.arange(1, n + 1, dtype=float)
        if self.kind == "harmonic":
            return 1.0 / k
        return np.log1p(1.0 / k)

    def normalizer(self, n: int) -> float:
        if self.kind == "harmonic":
            return math.log(n)
        return math.fsum(self.weights(n).tolist())


HARMONIC = WeightSeq("harmonic")
DK = WeightSeq("dk")


@dataclass(frozen=True)
class TestFunction:
    """A bounded Lipschitz f with sup|f| <= bound and Lipschitz constant ``lipschitz``."""

    name: str
    func: Callable
    bound: float
    lipschitz: float

    __test__ = False

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))


def clip_function() -> TestFunction:
    return TestFunction("clip", lambda x: np.clip(x, -1.0, 1.0), 1.0, 1.0)


def step_function(x0: float = 0.0) -> TestFunction:
    """Indicator of (-inf, x0] smoothed over a width of 0.1 to the right."""
    return TestFunction(f"step:{x0:g}", lambda x: np.clip((x0 + 0.1 - x) / 0.1, 0.0, 1.0), 1.0, 10.0)


def constant_function(c: float = 1.0) -> TestFunction:
    return TestFunction(f"const:{c:g}", lambda x: np.full(np.shape(x), c, dtype=float), abs(c), 0.0)


def parse_test_function(text: str) -> TestFunction:
    name, _, arg = text.partition(":")
    if name == "clip" and not arg:
        return clip_function()
    if name == "step":
        return step_function(float(arg) if arg else 0.0)
    if name in ("const", "one"):
        return constant_function(float(arg) if arg else 1.0)
    raise ValueError(f"unknown test function {text!r}")


def running_sums(stream, n: int) -> np.ndarray:
    """S_1..S_n from the next n bits of the stream."""
    bits = stream.next_bits(n).astype(np.int64)
    return np.cumsum(2 * bits - 1)


def _normalized_path(sums):
    k = np.arange(1, len(sums) + 1, dtype=float)
    return sums / np.sqrt(k)


def _check_steps(n):
    if n < 2:
        raise ValueError("ASCLT needs n >= 2 steps")


def estimates_from_path(sums, xs, weights: WeightSeq = DK):
    n = len(sums)
    _check_steps(n)
    y = _normalized_path(sums)
    w = weights.weights(n)
    norm = weights.normalizer(n)
    return [float(np.where(y <= x, w, 0.0).sum() / norm) for x in xs]


def asclt_estimate(stream, n: int, xs, weights: WeightSeq = DK) -> list:
    """Per-threshold log-average estimates of Phi(x) from the next n bits."""
    _check_steps(n)
    return estimates_from_path(running_sums(stream, n), list(xs), weights)


def weight_equivalence_check(stream, n: int, x: float):
    """(harmonic estimate, d_k estimate, harmonic - d_k) on the same prefix."""
    _check_steps(n)
    sums = running_sums(stream, n)
    (h,) = estimates_from_path(sums, [x], HARMONIC)
    (d,) = estimates_from_path(sums, [x], DK)
    return h, d, h - d


def subsequence(a: float, k_max: int) -> list:
    """n_k = min{n : log(n + 1) >= a^k} for k = 1..k_max.

    Since e^{a^k} is never an integer for rational a^k > 0, n_k is
    ceil(e^{a^k}) - 1, evaluated with enough working precision to resolve the
    ceiling.  Raises OverflowError once n_k would exceed 2^63 - 1.
    """
    if not 1 < a <= 2:
        raise ValueError("need 1 < a <= 2")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    out = []
    with mpmath.workprec(256):
        base = mpmath.mpf(a)
        for k in range(1, k_max + 1):
            target = base ** k
            if target > mpmath.log(MAX_N + 1):
                raise OverflowError(f"n_{k} exceeds 2^63 - 1 for a={a}")
            n_k = int(mpmath.ceil(mpmath.exp(target))) - 1
            if n_k > MAX_N:
                raise OverflowError(f"n_{k} exceeds 2^63 - 1 for a={a}")
            out.append(n_k)
    return out


def max_subsequence_index(a: float) -> int:
    """Largest k for which ``subsequence`` can return n_k without overflow."""
    k = 0
    while True:
        try:
            subsequence(a, k + 1)
        except OverflowError:
            return k
        k += 1


def _binomial_weights(k: int) -> np.ndarray:
    """P(S_k = 2j - k), j = 0..k, built in log space from the centre outward.

    Log-ratios log((k - j) / (j + 1)) are accumulated from the central term
    and the upper half is mirrored, so the weights are exactly symmetric;
    they are then normalized to sum to one.
    """
    start = (k + 1) // 2
    j = np.arange(start, k, dtype=float)
    logw = np.concatenate(([0.0], np.cumsum(np.log((k - j) / (j + 1)))))
    upper = np.exp(logw)                            # j = start..k
    lower = upper[::-1] if k % 2 else upper[:0:-1]  # j = 0..start-1
    w = np.concatenate((lower, upper))
    return w / w.sum()


def binomial_expectation(f: TestFunction, k: int) -> float:
    """E f(S_k / sqrt(k)) for a simple random walk, summed over the k + 1 outcomes."""
    if not 1 <= k <= MAX_EXPECTATION_K:
        raise ValueError(f"k must be in [1, {MAX_EXPECTATION_K}]")
    w = _binomial_weights(k)
    y = (2 * np.arange(k + 1, dtype=float) - k) / math.sqrt(k)
    fy = f(y)
    if np.all(fy == fy[0]):
        return float(fy[0])
    return float((w * fy).sum())


class ExpectationCache:
    """E f(Y_k) for k = 1..k_max, computed once and shared across paths."""

    def __init__(self, f: TestFunction, k_max: int):
        self.f = f
        self.values = np.array([binomial_expectation(f, k) for k in range(1, k_max + 1)])

    def __len__(self):
        return len(self.values)

    def upto(self, n):
        if n > len(self.values):
            raise ValueError(f"cache holds k <= {len(self.values)}, need {n}")
        return self.values[:n]


def tn_from_path(sums, f: TestFunction, expectations, weights: WeightSeq = DK, ns=None):
    """T_n = (1/D_n) sum_{k<=n} d_k (f(Y_k) - E f(Y_k)) for each n in ``ns``."""
    n_total = len(sums)
    ns = [n_total] if ns is None else list(ns)
    y = _normalized_path(sums)
    w = weights.weights(n_total)
    xi = f(y) - np.asarray(expectations)[:n_total]
    out = []
    for n in ns:
        _check_steps(n)
        out.append(math.fsum((w[:n] * xi[:n]).tolist()) / weights.normalizer(n))
    return out


def tn_statistic(stream, n: int, f: TestFunction, weights: WeightSeq = DK, cache=None) -> float:
    _check_steps(n)
    if cache is None or cache.f is not f:
        cache = ExpectationCache(f, n)
    (t,) = tn_from_path(running_sums(stream, n), f, cache.upto(n), weights)
    return t


@dataclass(frozen=True)
class StudyRow:
    n: int
    mean_tn2: float
    bound: float
    flag: bool


def shape(n):
    return math.log(math.log(n)) / math.log(n)


def variance_study(seeds, ns, f: TestFunction, open_stream, weights: WeightSeq = DK,
                   factor: float = 1.5):
    """Monte-Carlo E[T_n^2] across seeds against C * loglog n / log n.

    ``open_stream(seed)`` must return a fresh stream.  C is calibrated so the
    bound meets the estimate at the smallest n; rows are flagged where the
    estimate exceeds ``factor`` times the bound.
    """
    seeds = list(seeds)
    ns = list(ns)
    if len(seeds) < MIN_STUDY_SEEDS:
        raise ValueError(f"variance study needs >= {MIN_STUDY_SEEDS} seeds, got {len(seeds)}")
    if any(n < 100 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("ns must be increasing and each >= 100")
    n_max = ns[-1]
    cache = ExpectationCache(f, n_max)
    squares = np.zeros((len(seeds), len(ns)))
    for i, seed in enumerate(seeds):
        sums = running_sums(open_stream(seed), n_max)
        squares[i] = np.square(tn_from_path(sums, f, cache.values, weights, ns))
    means = [math.fsum(col.tolist()) / len(seeds) for col in squares.T]
    c_hat = means[0] / shape(ns[0])
    rows = []
    for n, m in zip(ns, means):
        b = c_hat * shape(n)
        rows.append(StudyRow(n, m, b, m > factor * b))
    return rows


def write_study_csv(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "mean_tn2", "bound", "flag"])
    for r in rows:
        w.writerow([r.n, f"{r.mean_tn2:.12g}", f"{r.bound:.12g}", int(r.flag)])
