"""Finite unions of dyadic cells, grid functions, and Hardy-Littlewood level sets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .dyadic import DyadicInterval

__all__ = [
    "DyadicSet",
    "GridFunction",
    "LevelSetFamily",
    "measure",
    "level_sets",
    "k_F",
    "cantor_set",
    "indicator",
    "random_dyadic_set",
    "MAX_LEVEL",
]

MAX_LEVEL = 40


@dataclass(frozen=True)
class DyadicSet:
    """The union of the level-``level`` cells listed in ``cells``."""

    level: int
    cells: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= self.level <= MAX_LEVEL:
            raise ValueError(f"level {self.level} outside [0, {MAX_LEVEL}]")
        cells = tuple(sorted(set(int(c) for c in self.cells)))
        if cells and not (0 <= cells[0] and cells[-1] < (1 << self.level)):
            raise ValueError("cell index outside [0, 2^level)")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def from_intervals(cls, level: int, intervals) -> DyadicSet:
        cells: list[int] = []
        for iv in intervals:
            if iv.level > level:
                raise ValueError(f"{iv} is finer than level {level}")
            cells.extend(iv.descendants(level))
        return cls(level, tuple(cells))

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> DyadicSet:
        n = mask.shape[0]
        level = n.bit_length() - 1
        if 1 << level != n:
            raise ValueError("mask length must be a power of two")
        return cls(level, tuple(np.flatnonzero(mask).tolist()))

    def mask(self, level: int | None = None) -> np.ndarray:
        """Boolean membership of every cell at ``level`` (default: own level)."""
        level = self.level if level is None else level
        if level < self.level:
            raise ValueError("cannot coarsen a set's membership mask")
        out = np.zeros(1 << self.level, dtype=bool)
        if self.cells:
            out[list(self.cells)] = True
        return np.repeat(out, 1 << (level - self.level))

    def refine(self, level: int) -> DyadicSet:
        return DyadicSet.from_mask(self.mask(level))

    def count_in(self, iv: DyadicInterval) -> int:
        """Number of own cells inside the dyadic interval ``iv`` (``iv`` not finer than the set)."""
        if iv.level > self.level:
            raise ValueError(f"{iv} is finer than level {self.level}")
        r = iv.descendants(self.level)
        return int(np.searchsorted(self._array, r.stop) - np.searchsorted(self._array, r.start))

    def measure_in(self, iv: DyadicInterval) -> Fraction:
        """``|F n iv|`` exactly."""
        if iv.level > self.level:
            return iv.length if _cell_of(iv, self.level) in self._cellset else Fraction(0)
        return Fraction(self.count_in(iv), 1 << self.level)

    @property
    def _array(self) -> np.ndarray:
        arr = self.__dict__.get("_arr")
        if arr is None:
            arr = np.asarray(self.cells, dtype=np.int64)
            object.__setattr__(self, "_arr", arr)
        return arr

    @property
    def _cellset(self) -> frozenset[int]:
        s = self.__dict__.get("_set")
        if s is None:
            s = frozenset(self.cells)
            object.__setattr__(self, "_set", s)
        return s

    def to_json(self) -> str:
        return json.dumps({"level": self.level, "cells": list(self.cells)})

    @classmethod
    def from_json(cls, text: str) -> DyadicSet:
        data = json.loads(text)
        return cls(int(data["level"]), tuple(int(c) for c in data["cells"]))

    @classmethod
    def load(cls, path: str | Path) -> DyadicSet:
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")


def _cell_of(iv: DyadicInterval, level: int) -> int:
    return iv.ancestor(level).index


def measure(f: DyadicSet) -> Fraction:
    return Fraction(len(f.cells), 1 << f.level)


def k_F(f: DyadicSet) -> int:
    """``floor(log2(1 / |F|)) + 1``."""
    m = measure(f)
    if m == 0:
        raise ValueError("k_F is undefined for a null set")
    q = 1 / m
    num, den = q.numerator, q.denominator
    e = max(num.bit_length() - den.bit_length(), 0)
    while den << (e + 1) <= num:
        e += 1
    while e > 0 and den << e > num:
        e -= 1
    return e + 1


@dataclass(frozen=True)
class LevelSetFamily:
    """Maximal dyadic intervals where ``F`` has density above ``2**-k``."""

    k: int
    intervals: tuple[DyadicInterval, ...]
    union_measure: Fraction


def _level_counts(f: DyadicSet) -> list[np.ndarray]:
    """``counts[j][i]`` = number of cells of ``f`` inside the level-j interval i."""
    counts = [np.zeros(0)] * (f.level + 1)
    c = f.mask().astype(np.int64)
    counts[f.level] = c
    for j in range(f.level - 1, -1, -1):
        c = c.reshape(-1, 2).sum(axis=1)
        counts[j] = c
    return counts


def level_sets(f: DyadicSet, k: int) -> LevelSetFamily:
    """Maximal dyadic ``I`` with ``|F n I| / |I| > 2**-k``."""
    if measure(f) == 0:
        raise ValueError("level sets of a null set are empty")
    if k < 0:
        raise ValueError("k must be non-negative")
    counts = _level_counts(f)
    found: list[DyadicInterval] = []
    # density of a level-j interval is count / 2^(L - j); compare count * 2^k > 2^(L - j)
    stack = [DyadicInterval(0, 0)]
    while stack:
        iv = stack.pop()
        cnt = int(counts[iv.level][iv.index])
        if cnt == 0:
            continue
        if cnt << k > 1 << (f.level - iv.level):
            found.append(iv)
        elif iv.level < f.level:
            stack.extend(iv.children())
    found.sort()
    union = sum((iv.length for iv in found), Fraction(0))
    return LevelSetFamily(k, tuple(found), union)


def cantor_set(big_n: int, s: int) -> DyadicSet:
    """Cantor-type set: keep the right halves, subdivide each into ``2**s`` cells, repeat.

    Stage 0 is the ``2**s`` cells of ``[0, 1)``; each later stage replaces every
    cell by the ``2**s`` subcells of its upper half. The result after
    ``big_n`` stages has measure ``2**-big_n``.
    """
    if big_n < 1 or s < 1:
        raise ValueError("need big_n >= 1 and s >= 1")
    level = (big_n + 1) * s + big_n
    if level > MAX_LEVEL:
        raise ValueError(f"cantor set needs level {level} > {MAX_LEVEL}")
    cells = np.arange(1 << s, dtype=np.int64)
    cur_level = s
    for _ in range(big_n):
        # upper half of each cell, then 2^s subcells of it
        cells = 2 * cells + 1
        cells = (cells[:, None] << s) + np.arange(1 << s, dtype=np.int64)[None, :]
        cells = cells.ravel()
        cur_level += 1 + s
    assert cur_level == level
    return DyadicSet(level, tuple(cells.tolist()))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples on the grid ``t * 2**-L`` together with their Fourier coefficients.

    ``coeffs[m + 2**(L-1)]`` is the coefficient of ``exp(2 pi i m x)`` for
    ``m`` in ``[-2**(L-1), 2**(L-1))``. Both views always agree under the DFT.
    """

    grid_level: int
    values: np.ndarray
    coeffs: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return 1 << self.grid_level

    @property
    def frequencies(self) -> np.ndarray:
        half = self.size // 2
        return np.arange(-half, half)

    @classmethod
    def from_values(cls, values) -> GridFunction:
        v = np.asarray(values, dtype=np.complex128)
        level = v.shape[0].bit_length() - 1
        if v.ndim != 1 or 1 << level != v.shape[0]:
            raise ValueError("grid length must be a power of two")
        c = np.fft.fftshift(np.fft.fft(v)) / v.shape[0]
        return cls(level, v, c)

    @classmethod
    def from_coeffs(cls, coeffs) -> GridFunction:
        c = np.asarray(coeffs, dtype=np.complex128)
        level = c.shape[0].bit_length() - 1
        if c.ndim != 1 or 1 << level != c.shape[0]:
            raise ValueError("band length must be a power of two")
        v = np.fft.ifft(np.fft.ifftshift(c)) * c.shape[0]
        return cls(level, v, c)

    @classmethod
    def from_function(cls, fn, grid_level: int) -> GridFunction:
        x = np.arange(1 << grid_level) / (1 << grid_level)
        return cls.from_values(fn(x))

    @classmethod
    def mode(cls, m: int, grid_level: int) -> GridFunction:
        c = np.zeros(1 << grid_level, dtype=np.complex128)
        c[m + (1 << (grid_level - 1))] = 1.0
        return cls.from_coeffs(c)

    def coeff(self, m: int) -> complex:
        return complex(self.coeffs[m + self.size // 2])

    def consistency_error(self) -> float:
        """Relative mismatch between ``values`` and the DFT of ``coeffs``."""
        v = np.fft.ifft(np.fft.ifftshift(self.coeffs)) * self.size
        scale = max(float(np.max(np.abs(self.values))), 1e-300)
        return float(np.max(np.abs(v - self.values))) / scale

    def l1(self) -> float:
        return float(np.mean(np.abs(self.values)))

    def l2(self) -> float:
        return float(np.sqrt(np.mean(np.abs(self.values) ** 2)))


def indicator(f: DyadicSet, grid_level: int, exact: bool = True) -> GridFunction:
    """``chi_F`` on the ``2**grid_level`` grid.

    With ``exact`` the Fourier coefficients are the true coefficients of the
    indicator truncated to the band, and the values are their band-limited
    reconstruction. Otherwise the values are the 0/1 cell samples.
    """
    if grid_level < f.level:
        raise ValueError("grid coarser than the set")
    if not exact:
        return GridFunction.from_values(f.mask(grid_level).astype(np.float64))
    n = 1 << grid_level
    m = np.arange(-n // 2, n // 2)
    coeffs = np.zeros(n, dtype=np.complex128)
    h = 1 << f.level
    # merge consecutive cells into maximal runs to keep the sum short
    cells = np.asarray(f.cells, dtype=np.int64)
    if cells.size:
        breaks = np.flatnonzero(np.diff(cells) != 1) + 1
        starts = cells[np.r_[0, breaks]]
        stops = cells[np.r_[breaks - 1, cells.size - 1]] + 1
        nz = m != 0
        mm = m[nz].astype(np.float64)
        acc = np.zeros(mm.shape, dtype=np.complex128)
        for a, b in zip(starts.tolist(), stops.tolist()):
            # phases reduced exactly: m * a / h mod 1
            pa = np.mod(m[nz] * a, h) / h
            pb = np.mod(m[nz] * b, h) / h
            acc += np.exp(-2j * np.pi * pb) - np.exp(-2j * np.pi * pa)
        coeffs[nz] = acc / (-2j * np.pi * mm)
        coeffs[n // 2] = len(f.cells) / h
    return GridFunction.from_coeffs(coeffs)


def random_dyadic_set(
    rng: np.random.Generator,
    level: int,
    target_measure: float | None = None,
) -> DyadicSet:
    """Union of random dyadic cells with geometrically distributed lengths.

    Each cell gets a level drawn uniformly from ``[2, level]`` (so its length
    is geometrically distributed) and a uniform position; cells are added
    until the union reaches ``target_measure``, which defaults to a
    log-uniform draw from ``[2**(2 - level), 1/2]``. Never returns a null set.
    """
    if target_measure is None:
        target_measure = 2.0 ** rng.uniform(-level + 2, -1)
    target = max(1, int(round(target_measure * (1 << level))))
    mask = np.zeros(1 << level, dtype=bool)
    filled = 0
    while filled < target:
        lv = int(rng.integers(min(2, level), level + 1))
        span = 1 << (level - lv)
        if span > 2 * target and lv < level:
            continue
        idx = int(rng.integers(0, 1 << lv))
        mask[idx * span : (idx + 1) * span] = True
        filled = int(mask.sum())
    return DyadicSet.from_mask(mask)
