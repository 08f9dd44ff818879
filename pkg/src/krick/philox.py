"""Counter-based random numbers (Philox4x64-10).

Every excursion / trial gets its own substream addressed by a (seed, stream,
unit) triple, so results do not depend on how units are split across workers
or on how many draws a neighbouring unit consumed.  Layout of the 256-bit
counter:

    word 0: block index inside the unit (increments as draws are consumed)
    word 1: unit index (excursion or trial number)
    word 2: channel (reserved, 0 for the main draw sequence)
    word 3: 0

and the 128-bit key is (seed, stream_id).  One block yields 4 uint64 words,
i.e. 4 doubles.

The implementation below is plain numpy and doubles as the reference for the
Cython kernel; both are tested against ``numpy.random.Philox`` output.
"""

import numpy as np

# Round constants of philox4x64 (Random123).
M0 = np.uint64(0xD2E7470EE14C6C93)
M1 = np.uint64(0xCA5A826395121157)
W0 = np.uint64(0x9E3779B97F4A7C15)
W1 = np.uint64(0xBB67AE8584CAA73B)

_MASK32 = np.uint64(0xFFFFFFFF)
_SH32 = np.uint64(32)
_SH11 = np.uint64(11)
_INV53 = 2.0 ** -53

# stream ids: one logical stream per experiment kind, so different
# subcommands draw independent randomness from the same seed
STREAM_TAIL = np.uint64(0xA1)
STREAM_SMOOTH = np.uint64(0xA2)
STREAM_STORE = np.uint64(0xA3)
STREAM_RENEWAL = np.uint64(0xA4)
STREAM_MIXING = np.uint64(0xA5)
STREAM_MIXING_M = np.uint64(0xA6)


def _mulhilo(a, b):
    """(hi, lo) of the 64x64->128 product, a scalar uint64, b array."""
    lo = a * b
    a_lo = a & _MASK32
    a_hi = a >> _SH32
    b_lo = b & _MASK32
    b_hi = b >> _SH32
    t = a_hi * b_lo + ((a_lo * b_lo) >> _SH32)
    w1 = (t & _MASK32) + a_lo * b_hi
    hi = a_hi * b_hi + (t >> _SH32) + (w1 >> _SH32)
    return hi, lo


def philox4x64(ctr, key):
    """Philox4x64-10 block function.

    ctr: (n, 4) uint64 array (not modified), key: length-2 uint64 sequence.
    Returns (n, 4) uint64 of random words.
    """
    c0 = ctr[:, 0].copy()
    c1 = ctr[:, 1].copy()
    c2 = ctr[:, 2].copy()
    c3 = ctr[:, 3].copy()
    k0 = np.uint64(key[0])
    k1 = np.uint64(key[1])
    with np.errstate(over="ignore"):     # the key schedule wraps mod 2^64
        for _ in range(10):
            hi0, lo0 = _mulhilo(M0, c0)
            hi1, lo1 = _mulhilo(M1, c2)
            c0 = hi1 ^ c1 ^ k0
            c1 = lo1
            c2 = hi0 ^ c3 ^ k1
            c3 = lo0
            k0 = k0 + W0
            k1 = k1 + W1
    out = np.empty((ctr.shape[0], 4), dtype=np.uint64)
    out[:, 0] = c0
    out[:, 1] = c1
    out[:, 2] = c2
    out[:, 3] = c3
    return out


def to_double(words):
    """uint64 -> float64 in [0, 1), the usual 53-bit mantissa convention."""
    return (words >> _SH11) * _INV53


def unit_block(seed, stream, units, block, channel=0):
    """Random block `block` of each unit in `units`; returns (n, 4) uint64."""
    units = np.asarray(units, dtype=np.uint64)
    ctr = np.zeros((units.size, 4), dtype=np.uint64)
    ctr[:, 0] = np.uint64(block)
    ctr[:, 1] = units
    ctr[:, 2] = np.uint64(channel)
    return philox4x64(ctr, (np.uint64(seed), np.uint64(stream)))


def unit_doubles(seed, stream, unit, n, channel=0):
    """First n doubles of a single unit's substream (testing/scalar paths)."""
    nblocks = (n + 3) // 4
    ctr = np.zeros((nblocks, 4), dtype=np.uint64)
    ctr[:, 0] = np.arange(nblocks, dtype=np.uint64)
    ctr[:, 1] = np.uint64(unit)
    ctr[:, 2] = np.uint64(channel)
    words = philox4x64(ctr, (np.uint64(seed), np.uint64(stream)))
    return to_double(words.reshape(-1)[:n])
