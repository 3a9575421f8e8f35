"""Stack randomness: reproducible move sequences for every site and species.

A stack is never stored. The ``k``-th oil (or water) move out of site ``x``
is read from the keyed PRF in :mod:`oilwater.prf`, so a :class:`StackSource`
is a pure function of its seed and the queried address.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple, Union

from . import prf

Site = Union[int, Tuple[int, ...]]

SPECIES = {"oil": prf.OIL, "water": prf.WATER}


def as_coords(site: Site) -> tuple[int, ...]:
    if isinstance(site, tuple):
        return tuple(int(c) for c in site)
    return (int(site),)


def species_code(species) -> int:
    if isinstance(species, str):
        return SPECIES[species]
    if species in (prf.OIL, prf.WATER):
        return int(species)
    raise ValueError(f"unknown species {species!r}")


def unit_step(j: int, dimension: int):
    """Map a direction index to ``+-1`` (d=1) or a signed unit vector."""
    sign = 1 if j & 1 else -1
    if dimension == 1:
        return sign
    step = [0] * dimension
    step[j >> 1] = sign
    return tuple(step)


@dataclass(frozen=True)
class StackAddress:
    site: Site
    index: int
    species: str = "oil"
    axis: int = 0


@dataclass(frozen=True)
class StackSource:
    seed: int
    mode: str = "plain"
    dimension: int = 1

    def __post_init__(self):
        if self.mode not in ("plain", "merged"):
            raise ValueError(f"unknown stack mode {self.mode!r}")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.mode == "merged" and self.dimension != 1:
            raise ValueError("merged stacks exist only in d=1")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def key(self, site: Site, species: int, tag: int = prf.TAG_STACK) -> int:
        return prf.site_key(self.seed, tag, species, as_coords(site))

    def direction(self, site: Site, index: int, species: int) -> int:
        """Direction index of the ``index``-th move of ``species`` at ``site``."""
        if index < 1:
            raise ValueError("stack index starts at 1")
        return prf.direction_index(self.key(site, species), index, self.dimension)

    def merged_direction(self, anchor: int, index: int, species: int) -> int:
        if index < 1:
            raise ValueError("stack index starts at 1")
        return prf.direction_index(self.key(anchor, species, prf.TAG_MERGED), index, 1)

    def count_right(self, site: Site, species: int, k: int) -> int:
        """Right moves among the first ``k`` draws of a d=1 stack."""
        if self.dimension != 1:
            raise ValueError("count_right is defined for d=1")
        return prf.count_ones_prefix(self.key(site, species), k)


def draw_move(source: StackSource, addr: StackAddress):
    """The move taken on firing ``addr.index`` of ``addr.species`` at ``addr.site``."""
    j = source.direction(addr.site, addr.index, species_code(addr.species))
    return unit_step(j, source.dimension)


def merged_draw(source: StackSource, firing_site: int, merged_index: int, species) -> int:
    """Move for a firing from a non-multiple of 3 under merged stacks.

    Sites ``3m - 1`` and ``3m + 1`` share the merged stack anchored at
    ``3m``; ``merged_index`` counts firings from the pair jointly. The left
    member moves by ``+Xbar``, the right member by ``-Xbar``.
    """
    if source.dimension != 1:
        raise ValueError("merged stacks exist only in d=1")
    r = firing_site % 3
    if r == 0:
        raise ValueError(f"site {firing_site} is in 3Z and uses plain stacks")
    anchor = firing_site + 1 if r == 2 else firing_site - 1
    sign = 1 if r == 2 else -1
    j = source.merged_direction(anchor, merged_index, species_code(species))
    return sign * (1 if j & 1 else -1)


def prefix_imbalance(source: StackSource, site: int, k: int) -> int:
    """Right-moving particles minus ``k`` after ``k`` firings at ``site``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    right = source.count_right(site, prf.OIL, k) + source.count_right(site, prf.WATER, k)
    return right - k
