"""Standard normal CDF, empirical CDFs and the exact Kolmogorov-Smirnov distance."""

from __future__ import annotations

import csv
import math

import numpy as np
from scipy import special

_SATURATE = 40.0


def phi(x: float) -> float:
    """Standard normal CDF; saturates to 0/1 beyond |x| > 40."""
    if x > _SATURATE:
        return 1.0
    if x < -_SATURATE:
        return 0.0
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def phi_array(xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    return np.where(xs > _SATURATE, 1.0, np.where(xs < -_SATURATE, 0.0, special.ndtr(xs)))


class EmpiricalCDF:
    """Step function t -> #{X_i <= t} / k over stored samples.

    Samples are buffered and sorted on first query; adding more samples later
    simply re-sorts.
    """

    def __init__(self, samples=()):
        self._parts = []
        self._sorted = np.zeros(0)
        self._dirty = False
        if len(samples):
            self.add(samples)

    def add(self, values):
        self._parts.append(np.asarray(values, dtype=float).ravel().copy())
        self._dirty = True

    def consume(self, batch):
        self.add(batch.value)

    def freeze(self):
        if self._dirty:
            self._sorted = np.sort(np.concatenate([self._sorted] + self._parts))
            self._parts = []
            self._dirty = False
        return self

    @property
    def samples(self) -> np.ndarray:
        return self.freeze()._sorted

    @property
    def k(self) -> int:
        return len(self.samples)

    def __call__(self, t):
        xs = self.samples
        if len(xs) == 0:
            raise ValueError("empirical CDF has no samples")
        return np.searchsorted(xs, t, side="right") / len(xs)

    def result(self):
        return self.freeze()


def ks_distance(ecdf: EmpiricalCDF) -> float:
    """sup_t |F_k(t) - Phi(t)|, evaluated exactly at the jump points."""
    xs = ecdf.samples
    k = len(xs)
    if k == 0:
        raise ValueError("KS distance of an empty sample")
    p = phi_array(xs)
    i = np.arange(1, k + 1)
    above = np.max(np.abs(i / k - p))
    below = np.max(np.abs((i - 1) / k - p))
    return float(max(above, below))


def pointwise_error(ecdf: EmpiricalCDF, grid) -> list:
    """Rows (t, F_k(t), Phi(t), F_k(t) - Phi(t)) in grid order."""
    grid = [float(t) for t in grid]
    if not grid:
        return []
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be sorted")
    f = ecdf(np.array(grid))
    return [(t, float(ft), phi(t), float(ft) - phi(t)) for t, ft in zip(grid, f)]


def write_pointwise_csv(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "ecdf", "phi", "diff"])
    for row in rows:
        w.writerow([f"{v:.12g}" for v in row])
