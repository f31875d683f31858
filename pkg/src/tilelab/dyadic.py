"""Dyadic geometry on the torus [0, 1) and on the integer frequency axis.

Every endpoint is an exact dyadic rational (``fractions.Fraction``); nothing
in this module touches floating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

__all__ = [
    "DyadicInterval",
    "RealInterval",
    "FrequencyInterval",
    "Tile",
    "CZError",
    "dilate",
    "tile_leq",
    "adjoint_support",
    "adjoint_support_pieces",
    "cz_decompose",
    "dyadic_cover",
    "torus_contains",
    "torus_intersects",
    "separate_scales",
]

# Smallest tile length for which 17 * I still fits on the torus without overlap.
MAX_OPERATOR_LENGTH = Fraction(1, 32)


class CZError(ValueError):
    """Raised when no Calderon-Zygmund decomposition exists for the input.

    ``cell`` is a dyadic interval disjoint from the family whose every
    admissible ancestor meets the family, and ``blocker`` the member whose
    double contains it.
    """

    def __init__(self, message: str, cell: DyadicInterval | None = None, blocker: DyadicInterval | None = None):
        super().__init__(message)
        self.cell = cell
        self.blocker = blocker


@dataclass(frozen=True, order=True)
class DyadicInterval:
    """``[index * 2**-level, (index + 1) * 2**-level)`` inside ``[0, 1)``."""

    level: int
    index: int

    def __post_init__(self) -> None:
        if self.level < 0:
            raise ValueError(f"negative level {self.level}")
        if not 0 <= self.index < (1 << self.level):
            raise ValueError(f"index {self.index} outside [0, 2^{self.level})")

    @property
    def length(self) -> Fraction:
        return Fraction(1, 1 << self.level)

    @property
    def lo(self) -> Fraction:
        return Fraction(self.index, 1 << self.level)

    @property
    def hi(self) -> Fraction:
        return Fraction(self.index + 1, 1 << self.level)

    @property
    def center(self) -> Fraction:
        return Fraction(2 * self.index + 1, 1 << (self.level + 1))

    def as_real(self) -> RealInterval:
        return RealInterval(self.lo, self.hi)

    def parent(self) -> DyadicInterval:
        if self.level == 0:
            raise ValueError("[0, 1) has no parent")
        return DyadicInterval(self.level - 1, self.index >> 1)

    def ancestor(self, level: int) -> DyadicInterval:
        if level > self.level:
            raise ValueError("ancestor level finer than interval")
        return DyadicInterval(level, self.index >> (self.level - level))

    def children(self) -> tuple[DyadicInterval, DyadicInterval]:
        return (
            DyadicInterval(self.level + 1, 2 * self.index),
            DyadicInterval(self.level + 1, 2 * self.index + 1),
        )

    def descendants(self, level: int) -> range:
        """Indices of the level-``level`` cells inside this interval."""
        shift = level - self.level
        if shift < 0:
            raise ValueError("descendant level coarser than interval")
        return range(self.index << shift, (self.index + 1) << shift)

    def contains(self, other: DyadicInterval) -> bool:
        if other.level < self.level:
            return False
        return (other.index >> (other.level - self.level)) == self.index

    def intersects(self, other: DyadicInterval) -> bool:
        return self.contains(other) or other.contains(self)

    def __str__(self) -> str:
        return f"[{self.lo}, {self.hi})"


@dataclass(frozen=True)
class RealInterval:
    """Half-open ``[lo, hi)`` on the real line; may stick out of ``[0, 1)``."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", Fraction(self.lo))
        object.__setattr__(self, "hi", Fraction(self.hi))
        if not self.lo < self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi})")

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    @property
    def center(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, other: RealInterval) -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def intersects(self, other: RealInterval) -> bool:
        return self.lo < other.hi and other.lo < self.hi

    def __str__(self) -> str:
        return f"[{self.lo}, {self.hi})"


@dataclass(frozen=True, order=True)
class FrequencyInterval:
    """``[index * 2**level, (index + 1) * 2**level)`` of integers."""

    level: int
    index: int

    def __post_init__(self) -> None:
        if self.level < 0:
            raise ValueError(f"negative level {self.level}")

    @property
    def length(self) -> int:
        return 1 << self.level

    @property
    def lo(self) -> int:
        return self.index << self.level

    @property
    def hi(self) -> int:
        return (self.index + 1) << self.level

    def __contains__(self, n: int) -> bool:
        return self.lo <= n < self.hi

    def contains(self, other: FrequencyInterval) -> bool:
        if other.level > self.level:
            return False
        return (other.index >> (self.level - other.level)) == self.index

    def intersects(self, other: FrequencyInterval) -> bool:
        return self.contains(other) or other.contains(self)

    @classmethod
    def containing(cls, n: int, level: int) -> FrequencyInterval:
        return cls(level, n >> level)

    def __str__(self) -> str:
        return f"[{self.lo}, {self.hi})"


@dataclass(frozen=True, order=True)
class Tile:
    """Area-one rectangle ``[omega, I]`` with ``|omega| = |I|**-1 = 2**scale``."""

    omega: FrequencyInterval
    interval: DyadicInterval

    def __post_init__(self) -> None:
        if self.omega.level != self.interval.level:
            raise ValueError(
                f"tile is not area one: |omega| = 2^{self.omega.level}, "
                f"|I| = 2^-{self.interval.level}"
            )

    @property
    def scale(self) -> int:
        return self.interval.level

    @classmethod
    def make(cls, scale: int, omega_index: int, interval_index: int) -> Tile:
        return cls(FrequencyInterval(scale, omega_index), DyadicInterval(scale, interval_index))

    def key(self) -> tuple[int, int, int]:
        return (self.scale, self.omega.index, self.interval.index)

    def __str__(self) -> str:
        return f"P({self.omega} x {self.interval})"


def dilate(iv: RealInterval | DyadicInterval, b: Fraction | int) -> RealInterval:
    """The interval of length ``b * |iv|`` sharing the center of ``iv``."""
    b = Fraction(b)
    if b <= 0:
        raise ValueError("dilation factor must be positive")
    c, half = iv.center, b * iv.length / 2
    return RealInterval(c - half, c + half)


def tile_leq(p: Tile, q: Tile) -> bool:
    """``p <= q`` iff ``I_p`` is inside ``I_q`` and ``omega_p`` contains ``omega_q``."""
    return q.interval.contains(p.interval) and p.omega.contains(q.omega)


def adjoint_support_pieces(p: Tile) -> tuple[list[RealInterval], RealInterval]:
    """Unwrapped pieces of the adjoint support and the 17-fold dilate ``I~``.

    The 14 pieces are the length-``|I|`` cells of
    ``[c - 17/2 |I|, c - 3/2 |I|] u [c + 3/2 |I|, c + 17/2 |I|]``.
    """
    iv = p.interval
    h = iv.length
    left = iv.lo - 8 * h
    right = iv.lo + 2 * h
    pieces = [RealInterval(left + r * h, left + (r + 1) * h) for r in range(7)]
    pieces += [RealInterval(right + r * h, right + (r + 1) * h) for r in range(7)]
    return pieces, dilate(iv, 17)


def adjoint_support(p: Tile) -> tuple[list[DyadicInterval], RealInterval]:
    """Torus-wrapped adjoint support cells of ``T_P`` plus the unwrapped ``I~_P``."""
    iv = p.interval
    if iv.length > MAX_OPERATOR_LENGTH:
        raise ValueError(
            f"tile length {iv.length} too coarse: 17*I_P would overlap itself on the torus"
        )
    n = 1 << iv.level
    offsets = list(range(-8, -1)) + list(range(2, 9))
    cells = [DyadicInterval(iv.level, (iv.index + o) % n) for o in offsets]
    return cells, dilate(iv, 17)


def torus_contains(outer: RealInterval, inner: RealInterval) -> bool:
    """Containment of the images of two real intervals on ``R / Z``."""
    if outer.length >= 1:
        return True
    if inner.length >= 1:
        return False
    shift = (inner.lo - outer.lo) // 1
    lo = inner.lo - shift
    return outer.lo <= lo and lo + inner.length <= outer.hi


def torus_intersects(a: RealInterval, b: RealInterval) -> bool:
    """Whether the images of ``a`` and ``b`` on ``R / Z`` overlap in positive length."""
    if a.length >= 1 or b.length >= 1:
        return True
    shift = (b.lo - a.lo) // 1
    lo = b.lo - shift
    # lo lies in [a.lo, a.lo + 1)
    return lo < a.hi or lo + b.length > a.lo + 1


def dyadic_cover(base: RealInterval) -> list[DyadicInterval]:
    """Maximal dyadic intervals partitioning ``base`` (which must sit in [0, 1))."""
    if base.lo < 0 or base.hi > 1:
        raise ValueError(f"{base} is not inside [0, 1)")
    out: list[DyadicInterval] = []
    lo = base.lo
    while lo < base.hi:
        level = 0
        while True:
            size = Fraction(1, 1 << level)
            if (lo / size).denominator == 1 and lo + size <= base.hi:
                break
            level += 1
            if level > 256:
                raise ValueError(f"{base} does not have dyadic endpoints")
        out.append(DyadicInterval(level, int(lo * (1 << level))))
        lo += Fraction(1, 1 << level)
    return out


def _cz_compatible(j: DyadicInterval, i: DyadicInterval) -> bool:
    return not dilate(i, 2).contains(j.as_real()) and not dilate(j, 2).contains(i.as_real())


def cz_decompose(
    a: Sequence[DyadicInterval], base: RealInterval | DyadicInterval
) -> list[DyadicInterval]:
    """Calderon-Zygmund decomposition of ``base`` relative to the family ``a``.

    Returns ``a`` together with the maximal dyadic intervals ``B`` such that
    ``a u B`` partitions ``base`` and no element of one family sits inside the
    double of an element of the other. Raises ``CZError`` when such a ``B``
    does not exist (a small cell trapped inside ``2I`` for some ``I`` in ``a``).
    """
    if isinstance(base, DyadicInterval):
        base = base.as_real()
    a = sorted(set(a))
    for x, y in zip(a, a[1:]):
        if x.intersects(y):
            raise ValueError(f"family is not pairwise disjoint: {x} and {y}")
    for i in a:
        if not base.contains(i.as_real()):
            raise ValueError(f"{i} is not inside {base}")
    members = set(a)
    out: list[DyadicInterval] = []
    stack = list(reversed(dyadic_cover(base)))
    while stack:
        j = stack.pop()
        if j in members:
            out.append(j)
            continue
        if any(j.contains(i) for i in a):
            stack.extend(reversed(j.children()))
            continue
        if all(_cz_compatible(j, i) for i in a):
            out.append(j)
            continue
        for i in a:
            if dilate(i, 2).contains(j.as_real()):
                raise CZError(f"{j} lies inside 2*{i}; no admissible cover exists", j, i)
        stack.extend(reversed(j.children()))
    return out


def separate_scales(tiles: Iterable[Tile], gap: int = 10) -> list[Tile]:
    """Keep only tiles whose scale is congruent to the finest scale modulo ``gap``.

    Any two retained tiles of different lengths then differ in length by a
    factor of at least ``2**gap``.
    """
    tiles = list(tiles)
    if not tiles:
        return []
    anchor = min(t.scale for t in tiles)
    return [t for t in tiles if (t.scale - anchor) % gap == 0]
