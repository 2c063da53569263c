import numpy as np
from hypothesis import given, strategies as st

from anderson_lab.rng import as_generator, stream, substream_seed


def test_streams_are_reproducible_and_distinct():
    a = stream(1, "x", 0).random(5)
    assert np.array_equal(a, stream(1, "x", 0).random(5))
    assert not np.array_equal(a, stream(1, "x", 1).random(5))
    assert not np.array_equal(a, stream(1, "y", 0).random(5))
    assert not np.array_equal(a, stream(2, "x", 0).random(5))


def test_order_of_creation_does_not_matter():
    first = [stream(3, "batch", i).random() for i in range(4)]
    second = [stream(3, "batch", i).random() for i in reversed(range(4))][::-1]
    assert first == second


@given(st.integers(0, 2**32), st.text(min_size=1, max_size=8), st.integers(0, 10**6))
def test_substream_seed_is_63_bit(seed, kind, index):
    s = substream_seed(seed, kind, index)
    assert 0 <= s < 2**63
    assert s == substream_seed(seed, kind, index)


def test_as_generator_passes_through():
    g = np.random.default_rng(0)
    assert as_generator(g) is g
    assert as_generator(5).random() == as_generator(5).random()
