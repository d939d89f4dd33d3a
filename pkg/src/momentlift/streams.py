"""Counter-based uniform random streams keyed by (seed, sample index).

Every sample owns an independent stream: the j-th uniform of sample i is a
pure function of (seed, i, j), so ensembles are reproducible bit-for-bit no
matter how the index range is partitioned across workers.  The generator is
Philox-4x64 with 10 rounds, evaluated vectorized over sample indices; the
key is (seed, 0) and the 256-bit counter carries (draw block, 0, sample
index, 0).
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_ROUNDS = 10

# float64 has 53 mantissa bits; top 53 bits of each word map to [0, 1)
_INV53 = float(2.0**-53)
_SHIFT11 = np.uint64(11)


def _mulhilo(a: np.ndarray, b: np.uint64) -> tuple[np.ndarray, np.ndarray]:
    # 64x64 -> 128 bit product via 32-bit limbs; numpy uint64 wraps silently
    lo = a * b
    ah = a >> _SHIFT32
    al = a & _MASK32
    bh = b >> _SHIFT32
    bl = b & _MASK32
    t = ah * bl + ((al * bl) >> _SHIFT32)
    u = al * bh + (t & _MASK32)
    hi = ah * bh + (t >> _SHIFT32) + (u >> _SHIFT32)
    return hi, lo


def philox4x64(c0, c1, c2, c3, k0, k1):
    """One Philox-4x64-10 block; inputs are uint64 scalars or arrays."""
    old = np.seterr(over="ignore")
    try:
        c0 = np.asarray(c0, dtype=np.uint64)
        c1 = np.asarray(c1, dtype=np.uint64)
        c2 = np.asarray(c2, dtype=np.uint64)
        c3 = np.asarray(c3, dtype=np.uint64)
        k0 = np.uint64(k0)
        k1 = np.uint64(k1)
        for _ in range(_ROUNDS):
            hi0, lo0 = _mulhilo(c0, _M0)
            hi1, lo1 = _mulhilo(c2, _M1)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
            k0 = k0 + _W0
            k1 = k1 + _W1
    finally:
        np.seterr(**old)
    return c0, c1, c2, c3


def _to_uniform(words: np.ndarray) -> np.ndarray:
    return (words >> _SHIFT11).astype(np.float64) * _INV53


def _seed_key(seed: int) -> np.uint64:
    return np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)


def uniform_matrix(seed: int, first_index: int, count: int, width: int) -> np.ndarray:
    """Uniforms ``u[i, j]`` in [0, 1): draws j < width for samples first_index + i."""
    if count == 0:
        return np.empty((0, width))
    k0 = _seed_key(seed)
    idx = np.arange(first_index, first_index + count, dtype=np.uint64)
    zeros = np.zeros(count, dtype=np.uint64)
    nblocks = -(-width // 4) if width else 0
    out = np.empty((count, max(4 * nblocks, width)))
    for b in range(nblocks):
        r = philox4x64(np.full(count, b, dtype=np.uint64), zeros, idx, zeros, k0, 0)
        for lane in range(4):
            out[:, 4 * b + lane] = _to_uniform(r[lane])
    return out[:, :width]


class SampleStream:
    """Sequential view of one sample's uniform stream; tracks the draw offset."""

    def __init__(self, seed: int, index: int, offset: int = 0):
        self._k0 = _seed_key(seed)
        self._index = np.uint64(int(index))
        self._offset = int(offset)

    def uniform(self, size: int | None = None) -> np.ndarray | float:
        n = 1 if size is None else int(size)
        first_block = self._offset // 4
        last_block = (self._offset + n - 1) // 4
        vals = np.empty(4 * (last_block - first_block + 1))
        zero = np.uint64(0)
        for j, b in enumerate(range(first_block, last_block + 1)):
            r = philox4x64(np.uint64(b), zero, self._index, zero, self._k0, 0)
            for lane in range(4):
                vals[4 * j + lane] = _to_uniform(r[lane])
        start = self._offset - 4 * first_block
        self._offset += n
        picked = vals[start:start + n]
        return float(picked[0]) if size is None else picked
