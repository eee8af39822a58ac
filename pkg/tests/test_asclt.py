import io
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from randclt.asclt import (
    DK,
    HARMONIC,
    ExpectationCache,
    asclt_estimate,
    binomial_expectation,
    clip_function,
    constant_function,
    max_subsequence_index,
    parse_test_function,
    running_sums,
    step_function,
    subsequence,
    tn_from_path,
    tn_statistic,
    variance_study,
    weight_equivalence_check,
    write_study_csv,
    TestFunction,
)
from randclt.bitsource import open_stream


def exact_expectation(g, k):
    """Sum over j of C(k, j) g(j) / 2^k in rationals, g taking the raw count j."""
    return sum(Fraction(math.comb(k, j)) * g(j) for j in range(k + 1)) / 2 ** k


# -- weights ----------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 10, 999, 10 ** 4, 10 ** 6])
def test_dk_normalizer_telescopes(n):
    assert DK.normalizer(n) == pytest.approx(math.log(n + 1), rel=1e-12)


def test_weights_positive_decreasing():
    for w in (DK.weights(10 ** 5), HARMONIC.weights(10 ** 5)):
        assert np.all(w > 0)
        assert np.all(np.diff(w) < 0)
    assert np.all(DK.weights(1000) < HARMONIC.weights(1000))


def test_unknown_weight_kind():
    from randclt.asclt import WeightSeq
    with pytest.raises(ValueError):
        WeightSeq("uniform")


# -- estimates ----------------------------------------------------------------

def test_all_ones_never_below_zero():
    assert asclt_estimate(open_stream("constant:1"), 10 ** 4, [0.0]) == [0.0]


@pytest.mark.parametrize("weights", [DK, HARMONIC])
def test_all_zeros_counts_every_step(weights):
    n = 5000
    (est,) = asclt_estimate(open_stream("constant:0"), n, [0.0], weights)
    expected = math.fsum(weights.weights(n).tolist()) / weights.normalizer(n)
    assert est == pytest.approx(expected, rel=1e-12)
    if weights is DK:
        assert est == pytest.approx(1.0, rel=1e-12)


def test_estimates_bounded_and_monotone_in_x():
    xs = np.linspace(-3, 3, 25)
    est = asclt_estimate(open_stream("prng:seed=6"), 10 ** 5, xs)
    assert all(0 <= e <= 1 for e in est)
    assert all(a <= b for a, b in zip(est, est[1:]))


def test_estimate_needs_two_steps():
    with pytest.raises(ValueError):
        asclt_estimate(open_stream("constant:1"), 1, [0.0])


def test_estimate_by_hand():
    # bits 1,0,0 -> S = 1,0,-1 -> Y = 1, 0, -1/sqrt(3)
    sums = running_sums(open_stream("periodic:100"), 3)
    assert sums.tolist() == [1, 0, -1]
    w = [math.log(2), math.log(1.5), math.log(4 / 3)]
    (est,) = asclt_estimate(open_stream("periodic:100"), 3, [0.0])
    assert est == pytest.approx((w[1] + w[2]) / math.log(4), rel=1e-14)


# -- weight equivalence --------------------------------------------------------

@pytest.mark.parametrize("n", [10 ** 3, 10 ** 4, 10 ** 5])
def test_equivalence_all_zero_closed_form(n):
    h, d, diff = weight_equivalence_check(open_stream("constant:0"), n, 0.0)
    harmonic_number = math.fsum(1 / k for k in range(1, n + 1))
    assert d == pytest.approx(1.0, rel=1e-12)
    assert diff == pytest.approx((harmonic_number - math.log(n)) / math.log(n), rel=1e-10)


def test_equivalence_shrinks_for_prng():
    for seed in (1, 2, 3):
        diffs = [abs(weight_equivalence_check(open_stream(f"prng:seed={seed}"), n, 0.0)[2])
                 for n in (10 ** 3, 10 ** 6)]
        assert diffs[-1] <= diffs[0]


# -- subsequence ------------------------------------------------------------------

def test_subsequence_base_two():
    assert subsequence(2, 3) == [7, 54, 2980]


@pytest.mark.parametrize("a", [1.01, 1.1, 1.5, 2.0])
def test_subsequence_is_minimal(a):
    ks = min(max_subsequence_index(a), 12)
    with mpmath.workprec(256):
        for k, n_k in enumerate(subsequence(a, ks), start=1):
            t = mpmath.mpf(a) ** k
            assert mpmath.log(n_k + 1) >= t
            assert mpmath.log(n_k) < t


def test_subsequence_overflow():
    k = max_subsequence_index(2)
    assert k == 5  # e^32 < 2^63 < e^64
    with pytest.raises(OverflowError):
        subsequence(2, k + 1)


def test_subsequence_ratio_settles():
    a = 1.05
    ns = subsequence(a, max_subsequence_index(a))
    logs = [math.log(n + 1) for n in ns]
    ratios = [b / c for b, c in zip(logs[1:], logs)]
    assert ratios[-1] == pytest.approx(a, rel=1e-6)


@pytest.mark.parametrize("a,k", [(1.0, 3), (2.5, 3), (1.5, 0)])
def test_subsequence_domain(a, k):
    with pytest.raises(ValueError):
        subsequence(a, k)


# -- expectations ---------------------------------------------------------------

def clip_of_count(k):
    return lambda j: max(-1, min(1, (2 * j - k) / math.sqrt(k)))


@pytest.mark.parametrize("k", [1, 2, 3, 4, 9, 17, 64, 333])
def test_clip_expectation_vanishes(k):
    assert abs(binomial_expectation(clip_function(), k)) <= 1e-15


@pytest.mark.parametrize("k", [1, 2, 5, 16, 100, 777])
def test_expectation_against_rational_oracle(k):
    sq = TestFunction("sqclip", lambda x: np.minimum(x * x, 4.0), 4.0, 4.0)
    exact = exact_expectation(lambda j: min(Fraction((2 * j - k) ** 2, k), 4), k)
    assert binomial_expectation(sq, k) == pytest.approx(float(exact), rel=1e-12)
    step = step_function(0.3)
    oracle = float(exact_expectation(lambda j: step(float((2 * j - k) / math.sqrt(k))).item(), k))
    assert binomial_expectation(step, k) == pytest.approx(oracle, rel=1e-12, abs=1e-15)


def test_second_moment_clipped_at_four():
    sq = TestFunction("sqclip", lambda x: np.minimum(x * x, 4.0), 4.0, 4.0)
    assert binomial_expectation(sq, 4) == pytest.approx(1.0, rel=1e-15)


def test_constant_function_expectation_exact():
    for k in (1, 10, 10 ** 5):
        assert binomial_expectation(constant_function(), k) == 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5000))
def test_odd_functions_vanish(k):
    assert abs(binomial_expectation(clip_function(), k)) <= 1e-10


def test_expectation_domain():
    with pytest.raises(ValueError):
        binomial_expectation(clip_function(), 0)


def test_cache_slices():
    c = ExpectationCache(step_function(0.0), 50)
    assert len(c) == 50
    assert c.upto(10).tolist() == [binomial_expectation(step_function(0.0), k) for k in range(1, 11)]
    with pytest.raises(ValueError):
        c.upto(51)


@pytest.mark.parametrize("text,name", [("clip", "clip"), ("step:0.5", "step:0.5"), ("one", "const:1")])
def test_parse_test_function(text, name):
    assert parse_test_function(text).name == name


def test_parse_bad_test_function():
    with pytest.raises(ValueError):
        parse_test_function("cos")


# -- T_n --------------------------------------------------------------------------

def test_tn_constant_function_is_zero():
    assert tn_statistic(open_stream("prng:seed=5"), 10 ** 4, constant_function()) == 0.0


def test_tn_all_ones_two_steps():
    # Y_1 = 1 and Y_2 = sqrt(2), both clip to 1, and E clip(Y_k) = 0
    assert tn_statistic(open_stream("constant:1"), 2, clip_function()) == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("f", [clip_function(), step_function(-0.5), step_function(1.0)])
def test_tn_bounded(f):
    for seed in range(5):
        t = tn_statistic(open_stream(f"prng:seed={seed}"), 5000, f)
        assert abs(t) <= 2 * f.bound


def test_tn_from_path_matches_statistic_prefixes():
    f = clip_function()
    cache = ExpectationCache(f, 4000)
    sums = running_sums(open_stream("prng:seed=12"), 4000)
    multi = tn_from_path(sums, f, cache.values, ns=[100, 1000, 4000])
    singles = [tn_statistic(open_stream("prng:seed=12"), n, f, cache=cache) for n in (100, 1000, 4000)]
    assert multi == pytest.approx(singles, rel=1e-12, abs=1e-15)


def test_tn_centred_across_seeds():
    f = clip_function()
    n = 10 ** 4
    cache = ExpectationCache(f, n)
    ts = np.array([tn_statistic(open_stream(f"prng:seed={s}"), n, f, cache=cache) for s in range(200)])
    assert abs(ts.mean()) <= 3 * ts.std(ddof=1) / math.sqrt(len(ts))


# -- variance study -------------------------------------------------------------------

def seeded(seed):
    return open_stream(f"prng:seed={seed}")


def test_study_needs_enough_seeds():
    with pytest.raises(ValueError):
        variance_study(range(99), [100, 1000], clip_function(), seeded)


def test_study_needs_increasing_ns():
    with pytest.raises(ValueError):
        variance_study(range(100), [1000, 100], clip_function(), seeded)
    with pytest.raises(ValueError):
        variance_study(range(100), [50, 1000], clip_function(), seeded)


def test_study_constant_function():
    rows = variance_study(range(100), [100, 1000], constant_function(), seeded)
    assert [r.mean_tn2 for r in rows] == [0.0, 0.0]
    assert not any(r.flag for r in rows)


def test_study_calibrates_at_smallest_n():
    rows = variance_study(range(100), [100, 1000, 10000], clip_function(), seeded)
    assert rows[0].bound == pytest.approx(rows[0].mean_tn2, rel=1e-15)
    assert rows[1].bound < rows[0].bound
    buf = io.StringIO()
    write_study_csv(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "n,mean_tn2,bound,flag" and len(lines) == 4
