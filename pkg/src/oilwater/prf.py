"""Keyed counter-based pseudo-random function.

Every random bit used by the simulator is a pure function of
``(seed, stream tag, species, site coordinates, word index)``. Words are
64-bit; a stack draw is a bit field of a word, so ``k`` consecutive draws
from one stack cost about ``k / 64`` evaluations.

The compiled core re-implements the same arithmetic in C; the functions
here are the reference definition and the fallback.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

PRF_ID = "splitmix64-chain/v1"

MASK64 = (1 << 64) - 1

GOLDEN = 0x9E3779B97F4A7C15
K_TAG = 0xE7037ED1A0B428DB
K_SITE = 0xD1B54A32D192ED03
K_WORD = 0xA0761D6478BD642F
M1 = 0xBF58476D1CE4E5B9
M2 = 0x94D049BB133111EB

# stream tags
TAG_STACK = 0
TAG_MERGED = 1
TAG_BINOMIAL = 2
TAG_POLICY = 3
TAG_WALK = 4
TAG_SWEEP = 5

OIL = 0
WATER = 1


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * M1) & MASK64
    z = ((z ^ (z >> 27)) * M2) & MASK64
    return z ^ (z >> 31)


def site_key(seed: int, tag: int, species: int, coords: Sequence[int] = ()) -> int:
    """Key of one stream: all words of a stack share it."""
    h = mix64((seed & MASK64) ^ GOLDEN)
    h = mix64(h + (tag * 2 + species + 1) * K_TAG)
    for c in coords:
        h = mix64(h + (c & MASK64) * K_SITE + GOLDEN)
    return h


def visit_key(key: int, visit: int) -> int:
    return mix64(key + (visit & MASK64) * K_TAG)


def word_at(key: int, w: int) -> int:
    return mix64(key + ((w + 1) & MASK64) * K_WORD)


def derive_seed(base_seed: int, *parts: int) -> int:
    """Child seed for a (base_seed, parts) schedule, e.g. (n, replicate)."""
    return word_at(site_key(base_seed, TAG_SWEEP, 0, parts), 0)


def layout(dimension: int) -> tuple[int, int]:
    """(bits per draw, draws per word) for a ``2 * dimension``-way direction.

    Returns ``(0, 1)`` when ``2 * dimension`` is not a power of two; such a
    draw takes a whole word reduced modulo ``2 * dimension``.
    """
    m = 2 * dimension
    if m & (m - 1):
        return 0, 1
    b = m.bit_length() - 1
    return b, 64 // b


def direction_index(key: int, k: int, dimension: int) -> int:
    """Direction of the ``k``-th draw (``k >= 1``) of the stream ``key``.

    Index ``j`` means axis ``j >> 1``, sign ``+1`` if ``j & 1`` else ``-1``.
    """
    b, per = layout(dimension)
    i = k - 1
    if b == 0:
        return word_at(key, i) % (2 * dimension)
    word = word_at(key, i // per)
    return (word >> (b * (i % per))) & ((1 << b) - 1)


# -- vectorised variants -------------------------------------------------

_U = np.uint64


def mix64_np(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=_U)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _U(30))) * _U(M1)
        z = (z ^ (z >> _U(27))) * _U(M2)
    return z ^ (z >> _U(31))


def words_np(key: int, w: np.ndarray) -> np.ndarray:
    """``word_at(key, w)`` over an array of word indices."""
    w = np.asarray(w, dtype=_U)
    with np.errstate(over="ignore"):
        z = _U(key) + (w + _U(1)) * _U(K_WORD)
    return mix64_np(z)


def count_ones_prefix(key: int, k: int) -> int:
    """Number of set bits among the first ``k`` bits of a 1-bit-per-draw stream."""
    if k <= 0:
        return 0
    full, rem = divmod(k, 64)
    total = 0
    if full:
        total = int(np.bitwise_count(words_np(key, np.arange(full))).sum())
    if rem:
        total += bin(word_at(key, full) & ((1 << rem) - 1)).count("1")
    return total
