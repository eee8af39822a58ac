import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from randclt.bitsource import open_stream
from randclt.errors import ConfigError, SourceExhausted
from randclt.sampling import (
    BlockScheme,
    ValueCollector,
    block_bounds,
    next_sample,
    sample_run,
)

TRI = BlockScheme.triangular()


@pytest.mark.parametrize("scheme,k,expected", [
    (TRI, 4, (7, 4)),
    (TRI, 1, (1, 1)),
    (BlockScheme.fixed(4), 3, (9, 4)),
    (BlockScheme.affine(2, 0), 3, (7, 6)),
])
def test_block_bounds_examples(scheme, k, expected):
    assert block_bounds(scheme, k) == expected


@pytest.mark.parametrize("scheme", [TRI, BlockScheme.fixed(5), BlockScheme.affine(3, 2)])
def test_blocks_tile(scheme):
    assert block_bounds(scheme, 1)[0] == 1
    start, size = block_bounds(scheme, 1)
    for k in range(2, 100_001):
        nxt, nsize = block_bounds(scheme, k)
        assert nxt == start + size
        start, size = nxt, nsize


def test_block_bounds_overflow():
    with pytest.raises(OverflowError):
        block_bounds(TRI, 5 * 10 ** 9)


def test_first_triangular_samples(tmp_path):
    path = tmp_path / "b.txt"
    path.write_text("101")
    s = open_stream(f"file-ascii:{path}")
    x1 = next_sample(s, TRI, 1)
    x2 = next_sample(s, TRI, 2)
    assert (x1.value, x1.block_sum) == (1.0, 1)
    assert x2.value == 0.0


def test_all_zero_source():
    s = open_stream("constant:0")
    for k in range(1, 30):
        assert next_sample(s, TRI, k).value == pytest.approx(-math.sqrt(k), rel=1e-15)


def test_fixed_all_ones():
    assert next_sample(open_stream("constant:1"), BlockScheme.fixed(4), 1).value == 2.0


def test_next_sample_requires_order():
    s = open_stream("constant:1")
    with pytest.raises(ValueError):
        next_sample(s, TRI, 2)


@pytest.mark.parametrize("scheme,k_max,bits", [
    (TRI, 4, 10),
    (BlockScheme.fixed(4), 100_000, 400_000),
    (BlockScheme.affine(2, 0), 3, 12),
])
def test_sample_run_consumption(scheme, k_max, bits):
    s = open_stream("prng:seed=9")
    (values,) = sample_run(s, scheme, k_max, [ValueCollector()])
    assert len(values) == k_max
    assert s.position == bits


def test_sample_run_matches_next_sample():
    s = open_stream("prng:seed=2")
    (values,) = sample_run(s, TRI, 3000, [ValueCollector()], chunk_bits=1 << 12)
    s.reset()
    one_by_one = [next_sample(s, TRI, k).value for k in range(1, 3001)]
    assert values.tolist() == one_by_one


def test_every_sink_sees_same_stream():
    a, b = ValueCollector(), ValueCollector()
    va, vb = sample_run(open_stream("prng:seed=4"), BlockScheme.fixed(3), 5000, [a, b])
    assert np.array_equal(va, vb)


def test_parity_and_range():
    s = open_stream("prng:seed=11")
    for k in range(1, 2000):
        smp = next_sample(s, TRI, k)
        scaled = round(smp.value * math.sqrt(smp.block_size))
        assert scaled % 2 == smp.block_size % 2
        assert abs(smp.value) <= math.sqrt(smp.block_size)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 64 - 1), k=st.integers(1, 400))
def test_rademacher_form_agrees(seed, k):
    skip = k * (k - 1) // 2
    s = open_stream(f"prng:seed={seed}")
    if skip:
        s.next_bits(skip)
    smp = next_sample(s, TRI, k)
    s.reset()
    bits = s.next_bits(skip + k)[skip:]
    r = 2 * bits.astype(int) - 1
    assert smp.value == int(r.sum()) / math.sqrt(k)


def test_exhaustion_reports_k(tmp_path):
    path = tmp_path / "b.txt"
    path.write_text("1" * 12)
    s = open_stream(f"file-ascii:{path}")
    sink = ValueCollector()
    with pytest.raises(SourceExhausted) as info:
        sample_run(s, TRI, 10, [sink])
    assert info.value.k_reached == 4
    assert len(sink.result()) == 4


@pytest.mark.parametrize("text", ["tri", "fixed:4", "affine:2:0", "affine:3:1"])
def test_scheme_round_trip(text):
    assert str(BlockScheme.parse(text)) == text


@pytest.mark.parametrize("text", ["triangle", "fixed:0", "fixed:x", "affine:0:1", "affine:1:-1", "affine:2"])
def test_bad_scheme(text):
    with pytest.raises(ConfigError):
        BlockScheme.parse(text)
