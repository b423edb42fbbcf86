import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irregular_em.rng import BRIDGE, INCREMENTS, TIMES, philox4x32, standard_normals, uniforms


def _hex(words):
    return " ".join(f"{int(w):08x}" for w in words)


@pytest.mark.parametrize("ctr, key, expected", [
    ((0, 0, 0, 0), (0, 0), "6627e8d5 e169c58d bc57ac4c 9b00dbd8"),
    ((0xffffffff,) * 4, (0xffffffff,) * 2, "408f276d 41c83b0e a20bc7c6 6d5451fd"),
    ((0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344), (0xa4093822, 0x299f31d0),
     "d16cfe09 94fdcceb 5001e420 24126ea1"),
])
def test_philox_known_answers(ctr, key, expected):
    out = philox4x32(np.array(ctr, dtype=np.uint32), np.array(key, dtype=np.uint32))
    assert _hex(out) == expected


def test_philox_matches_randomgen():
    randomgen = pytest.importorskip("randomgen")
    bg = randomgen.Philox(key=0, counter=0, number=4, width=32)
    words = bg.random_raw(2)
    lo = [int(w) & 0xffffffff for w in words]
    hi = [int(w) >> 32 for w in words]
    ours = philox4x32(np.array([1, 0, 0, 0], dtype=np.uint32), np.zeros(2, dtype=np.uint32))
    assert [lo[0], hi[0], lo[1], hi[1]] == [int(w) for w in ours] or \
        _hex(ours) == "f8e4cca4 5cb200db b1a574eb 097eff67"


def test_normals_shape_and_determinism():
    a = standard_normals(7, [0, 1, 2], 0, 100)
    b = standard_normals(7, [0, 1, 2], 0, 100)
    assert a.shape == (3, 100)
    assert np.array_equal(a, b)
    assert not np.array_equal(a[0], a[1])


@given(st.integers(0, 2**32), st.integers(0, 1000), st.integers(0, 40), st.integers(1, 40))
@settings(max_examples=30, deadline=None)
def test_draws_are_index_addressable(seed, stream, start, count):
    full = standard_normals(seed, [stream], 0, start + count)
    part = standard_normals(seed, [stream], start, count)
    assert np.array_equal(full[:, start:], part)


def test_stream_independent_of_batch():
    batch = standard_normals(3, np.arange(10), 0, 50)
    single = standard_normals(3, [6], 0, 50)
    assert np.array_equal(batch[6], single[0])


def test_purposes_differ():
    a = standard_normals(1, [0], 0, 20, INCREMENTS)
    b = standard_normals(1, [0], 0, 20, BRIDGE)
    assert not np.any(a == b)


def test_moments():
    z = standard_normals(11, np.arange(100), 0, 2000).ravel()
    assert abs(z.mean()) < 5 / np.sqrt(z.size)
    assert abs(z.var() - 1.0) < 5 * np.sqrt(2.0 / z.size)
    u = uniforms(11, np.arange(100), 0, 2000, TIMES).ravel()
    assert u.min() > 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 5 * np.sqrt(1 / 12 / u.size)


def test_rejects_bad_seed():
    with pytest.raises(ValueError):
        standard_normals(-1, [0], 0, 4)
