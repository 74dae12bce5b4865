"""Seeded random streams with a fixed, platform-independent algorithm.

Each stream runs ``LANES`` independent xoshiro256** generators whose 256-bit
states are filled from a SplitMix64 sequence started at the seed. Output is
produced in blocks: block ``b`` holds ``next(lane 0), ..., next(lane LANES-1)``.
Interleaving lanes lets the numpy fallback vectorise across lanes while the
numba kernel walks the same schedule, so both paths emit identical words.

Constants (public, from Blackman & Vigna):

* SplitMix64: increment 0x9E3779B97F4A7C15, multipliers 0xBF58476D1CE4E5B9
  and 0x94D049BB133111EB, shifts 30/27/31.
* xoshiro256**: output ``rotl(s1 * 5, 7) * 9``, state shift 17, rotation 45.

Derived seeds (:func:`derive_seed`) fold each part into a running hash with
``h = splitmix64(h ^ part)``; string parts are first reduced with 64-bit
FNV-1a.
"""

import numpy as np

from .._accel import njit, pick

LANES = 256
MASK64 = (1 << 64) - 1

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def splitmix64(x):
    """One SplitMix64 output for state ``x`` (after the increment)."""
    z = (x + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def fnv1a64(text):
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & MASK64
    return h


def derive_seed(*parts):
    """Mix integers and strings into one 64-bit seed.

    ``derive_seed(experiment_seed, "rcd-0.9", job_seed)`` is the canonical
    way to split a stream per job; the fold is order sensitive.
    """
    h = 0
    for part in parts:
        if isinstance(part, str):
            value = fnv1a64(part)
        else:
            value = int(part) & MASK64
        h = splitmix64(h ^ value)
    return h


def _seed_lanes(seed):
    state = np.empty((LANES, 4), dtype=np.uint64)
    x = int(seed) & MASK64
    for lane in range(LANES):
        for word in range(4):
            state[lane, word] = splitmix64(x)
            x = (x + _GOLDEN) & MASK64
    return state


@njit
def _blocks_numba(state, n_blocks):
    lanes = state.shape[0]
    out = np.empty(n_blocks * lanes, dtype=np.uint64)
    for b in range(n_blocks):
        for lane in range(lanes):
            s0 = state[lane, 0]
            s1 = state[lane, 1]
            s2 = state[lane, 2]
            s3 = state[lane, 3]
            x = s1 * np.uint64(5)
            r = (x << np.uint64(7)) | (x >> np.uint64(57))
            out[b * lanes + lane] = r * np.uint64(9)
            t = s1 << np.uint64(17)
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = (s3 << np.uint64(45)) | (s3 >> np.uint64(19))
            state[lane, 0] = s0
            state[lane, 1] = s1
            state[lane, 2] = s2
            state[lane, 3] = s3
    return out


def _blocks_numpy(state, n_blocks):
    lanes = state.shape[0]
    out = np.empty((n_blocks, lanes), dtype=np.uint64)
    s0, s1, s2, s3 = (state[:, i].copy() for i in range(4))
    five, nine = np.uint64(5), np.uint64(9)
    c7, c57, c17, c45, c19 = (np.uint64(v) for v in (7, 57, 17, 45, 19))
    for b in range(n_blocks):
        x = s1 * five
        out[b] = ((x << c7) | (x >> c57)) * nine
        t = s1 << c17
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = (s3 << c45) | (s3 >> c19)
    state[:, 0], state[:, 1], state[:, 2], state[:, 3] = s0, s1, s2, s3
    return out.reshape(-1)


_blocks = pick(_blocks_numba, _blocks_numpy)

_TWO53 = 1.0 / (1 << 53)


class RngStream:
    """Deterministic random stream.

    >>> a, b = RngStream(7), RngStream(7)
    >>> bool((a.random(5) == b.random(5)).all())
    True
    """

    def __init__(self, seed):
        self.seed = int(seed) & MASK64
        self._state = _seed_lanes(self.seed)
        self._buffer = np.empty(0, dtype=np.uint64)
        self._pos = 0

    def spawn(self, *labels):
        """Independent child stream keyed on this stream's seed and ``labels``."""
        return RngStream(derive_seed(self.seed, *labels))

    def next_u64(self, n):
        n = int(n)
        avail = self._buffer.size - self._pos
        if n <= avail:
            out = self._buffer[self._pos:self._pos + n]
            self._pos += n
            return out.copy()
        head = self._buffer[self._pos:]
        need = n - avail
        n_blocks = -(-need // LANES)
        fresh = _blocks(self._state, n_blocks)
        self._buffer = fresh
        self._pos = need
        return np.concatenate([head, fresh[:need]])

    def random(self, size=None):
        """Uniform float64 in [0, 1) with 53 random bits."""
        shape = () if size is None else size
        n = int(np.prod(shape))
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * _TWO53
        if size is None:
            return float(u[0])
        return u.reshape(shape)

    def normal(self, size, std=1.0, dtype=np.float64):
        """Box-Muller normals; two uniforms per pair of outputs."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape))
        m = (n + 1) // 2
        u = self.random(2 * m)
        u1 = 1.0 - u[:m]  # (0, 1], keeps log finite
        radius = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u[m:]
        z = np.concatenate([radius * np.cos(theta), radius * np.sin(theta)])[:n]
        return (z * std).astype(dtype).reshape(shape)

    def integers(self, high, size=None):
        """Integers in ``[0, high)``; bias below 2**-32 for high < 2**21."""
        u = self.random(1 if size is None else size)
        out = np.minimum(np.floor(u * high).astype(np.int64), high - 1)
        if size is None:
            return int(out[0])
        return out

    def permutation(self, n):
        keys = self.next_u64(n)
        return np.argsort(keys, kind="stable")

    def bits16(self, n):
        """``n`` uniform 16-bit words, four per 64-bit draw."""
        words = self.next_u64(-(-int(n) // 4))
        return words.astype("<u8").view("<u2")[:n]


def counter_uniform(key, counters):
    """Stateless uniforms: ``splitmix64(key + counter * golden)`` per element.

    Used where a draw must be a pure function of an index (noise fixed per
    example) without materialising a table.
    """
    c = np.asarray(counters, dtype=np.uint64)
    z = np.uint64(int(key) & MASK64) + c * np.uint64(_GOLDEN)
    z = z + np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * _TWO53
