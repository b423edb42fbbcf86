"""Counter-based Gaussian and uniform draws (Philox4x32-10).

Every draw is a pure function of ``(seed, stream, purpose, index)``, so a
path's increments do not depend on how paths are batched or which worker
produces them.

Key   = seed as two 32-bit words.
Counter = (block lo, block hi, stream lo, stream hi[24 bits] | purpose << 24),
where ``block = index // 2``; one Philox block yields two draws.
"""
from __future__ import annotations

import numba
import numpy as np

__all__ = [
    "INCREMENTS",
    "BRIDGE",
    "TIMES",
    "philox4x32",
    "standard_normals",
    "uniforms",
]

# purposes
INCREMENTS = 0
BRIDGE = 1
TIMES = 2

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0


@numba.njit(cache=True, nogil=True, inline="always")
def _rounds(c0, c1, c2, c3, k0, k1):
    for _ in range(10):
        p0 = _M0 * np.uint64(c0)
        p1 = _M1 * np.uint64(c2)
        hi0 = np.uint32(p0 >> np.uint64(32))
        lo0 = np.uint32(p0 & _MASK32)
        hi1 = np.uint32(p1 >> np.uint64(32))
        lo1 = np.uint32(p1 & _MASK32)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = np.uint32(k0 + _W0)
        k1 = np.uint32(k1 + _W1)
    return c0, c1, c2, c3


@numba.njit(cache=True, nogil=True)
def philox4x32(counter, key):
    """Philox4x32 with 10 rounds on one 128-bit counter block."""
    c0, c1, c2, c3 = _rounds(
        np.uint32(counter[0]), np.uint32(counter[1]),
        np.uint32(counter[2]), np.uint32(counter[3]),
        np.uint32(key[0]), np.uint32(key[1]),
    )
    out = np.empty(4, dtype=np.uint32)
    out[0] = c0
    out[1] = c1
    out[2] = c2
    out[3] = c3
    return out


@numba.njit(cache=True, nogil=True, inline="always")
def _block(seed, stream, purpose, block):
    k0 = np.uint32(seed & np.uint64(0xFFFFFFFF))
    k1 = np.uint32(seed >> np.uint64(32))
    c0 = np.uint32(block & np.uint64(0xFFFFFFFF))
    c1 = np.uint32(block >> np.uint64(32))
    c2 = np.uint32(stream & np.uint64(0xFFFFFFFF))
    c3 = np.uint32(((stream >> np.uint64(32)) & np.uint64(0xFFFFFF))
                   | (np.uint64(purpose) << np.uint64(24)))
    return _rounds(c0, c1, c2, c3, k0, k1)


@numba.njit(cache=True, nogil=True, inline="always")
def _unit_pair(w0, w1, w2, w3):
    # 53-bit uniforms strictly inside (0, 1)
    a = (np.uint64(w0) >> np.uint64(5)) * np.uint64(67108864) + (np.uint64(w1) >> np.uint64(6))
    b = (np.uint64(w2) >> np.uint64(5)) * np.uint64(67108864) + (np.uint64(w3) >> np.uint64(6))
    return (a + 0.5) * _INV_2_53, (b + 0.5) * _INV_2_53


@numba.njit(cache=True, nogil=True)
def _fill_normals(seed, streams, purpose, start, out):
    count = out.shape[1]
    for i in range(streams.shape[0]):
        s = streams[i]
        j = 0
        idx = start
        while j < count:
            w0, w1, w2, w3 = _block(seed, s, purpose, np.uint64(idx // 2))
            u1, u2 = _unit_pair(w0, w1, w2, w3)
            r = np.sqrt(-2.0 * np.log(u1))
            if idx % 2 == 0:
                out[i, j] = r * np.cos(_TWO_PI * u2)
                j += 1
                idx += 1
                if j < count:
                    out[i, j] = r * np.sin(_TWO_PI * u2)
                    j += 1
                    idx += 1
            else:
                out[i, j] = r * np.sin(_TWO_PI * u2)
                j += 1
                idx += 1


@numba.njit(cache=True, nogil=True)
def _fill_uniforms(seed, streams, purpose, start, out):
    count = out.shape[1]
    for i in range(streams.shape[0]):
        s = streams[i]
        for j in range(count):
            idx = start + j
            w0, w1, w2, w3 = _block(seed, s, purpose, np.uint64(idx // 2))
            u1, u2 = _unit_pair(w0, w1, w2, w3)
            out[i, j] = u1 if idx % 2 == 0 else u2


def _prepare(seed, streams, start, count):
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must fit in 64 unsigned bits")
    if start < 0 or count < 0:
        raise ValueError("start and count must be non-negative")
    streams = np.atleast_1d(np.asarray(streams, dtype=np.uint64))
    return np.uint64(seed), streams, np.empty((streams.shape[0], count))


def standard_normals(seed: int, streams, start: int, count: int,
                     purpose: int = INCREMENTS) -> np.ndarray:
    """N(0, 1) draws with indices ``start .. start+count-1`` for each stream.

    Returns an array of shape ``(len(streams), count)``.
    """
    seed, streams, out = _prepare(seed, streams, start, count)
    _fill_normals(seed, streams, np.uint64(purpose), start, out)
    return out


def uniforms(seed: int, streams, start: int, count: int,
             purpose: int = TIMES) -> np.ndarray:
    """Uniform draws on the open interval (0, 1), same indexing as normals."""
    seed, streams, out = _prepare(seed, streams, start, count)
    _fill_uniforms(seed, streams, np.uint64(purpose), start, out)
    return out
