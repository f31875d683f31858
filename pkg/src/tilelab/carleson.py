"""Discretized lacunary Carleson operator and its Walsh model."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dyadic import MAX_OPERATOR_LENGTH, Tile, adjoint_support
from .setmodel import DyadicSet, GridFunction

__all__ = [
    "LacunarySequence",
    "KernelFamily",
    "Linearizer",
    "build_kernel",
    "modulated_hilbert",
    "carleson_sup",
    "linearize",
    "e_of",
    "e_mask",
    "tile_operator",
    "tile_adjoint",
    "tree_operator",
    "tree_adjoint",
    "linearized_adjoint",
    "fwht",
    "walsh_coefficients",
    "walsh_partial_sum",
    "walsh_carleson",
    "dyadic_averages",
]


@dataclass(frozen=True)
class LacunarySequence:
    """Increasing positive integers with ``sum(n_1..n_k) < c_bar * n_(k+1)``."""

    terms: tuple[int, ...]
    alpha: Fraction = Fraction(2)
    c_bar: Fraction | None = None

    def __post_init__(self) -> None:
        terms = tuple(int(t) for t in self.terms)
        if not terms:
            raise ValueError("empty sequence")
        if terms[0] <= 0 or any(b <= a for a, b in zip(terms, terms[1:])):
            raise ValueError("terms must be positive and strictly increasing")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "alpha", Fraction(self.alpha))
        if self.alpha <= 1:
            raise ValueError("lacunarity ratio must exceed 1")
        ratios = [Fraction(sum(terms[: k + 1]), terms[k + 1]) for k in range(len(terms) - 1)]
        worst = max(ratios, default=Fraction(0))
        if self.c_bar is None:
            # next multiple of 1/8 strictly above the worst ratio
            object.__setattr__(self, "c_bar", Fraction(int(worst * 8) + 1, 8))
        else:
            object.__setattr__(self, "c_bar", Fraction(self.c_bar))
            if worst >= self.c_bar:
                raise ValueError(f"partial sums reach {worst} * next term >= c_bar = {self.c_bar}")

    @classmethod
    def powers(cls, count: int, base: int = 2, start: int = 1, shift: int = 0) -> LacunarySequence:
        """``base**j + shift`` for ``j = start .. start + count - 1``."""
        return cls(tuple(base**j + shift for j in range(start, start + count)), Fraction(base))

    def __len__(self) -> int:
        return len(self.terms)

    def __getitem__(self, j: int) -> int:
        return self.terms[j]

    def truncate(self, bound: int) -> LacunarySequence:
        """Terms strictly below ``bound``."""
        kept = tuple(t for t in self.terms if t < bound)
        return LacunarySequence(kept, self.alpha, self.c_bar)

    @property
    def cluster_constant(self) -> int:
        """``10 * (1 + floor(1 / (alpha - 1)))``."""
        return 10 * (1 + int(1 / (self.alpha - 1)))


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    out = np.zeros_like(t)
    inner = (t > 0) & (t < 1)
    ti = t[inner]
    a = np.exp(-1.0 / ti)
    b = np.exp(-1.0 / (1.0 - ti))
    out[inner] = a / (a + b)
    out[t >= 1] = 1.0
    return out


@dataclass(frozen=True)
class KernelFamily:
    """Cutoff ``theta`` (1 on ``|y| <= 8 - taper``, 0 on ``|y| >= 8``) and ``psi``."""

    taper_width: float = 4.0

    def theta(self, y) -> np.ndarray:
        y = np.abs(np.asarray(y, dtype=np.float64))
        return _smooth_step((8.0 - y) / self.taper_width)

    def psi(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        out = np.zeros_like(y)
        nz = y != 0
        yn = y[nz]
        out[nz] = (self.theta(yn) - self.theta(2.0 * yn)) / yn
        return out

    def psi_k(self, k: int, y) -> np.ndarray:
        """``2**k * psi(2**k * y)``."""
        s = float(2**k)
        return s * self.psi(s * np.asarray(y, dtype=np.float64))

    def partial_sum(self, y, top: int) -> np.ndarray:
        """``sum_{k=0..top} psi_k(y)``."""
        y = np.asarray(y, dtype=np.float64)
        return sum(self.psi_k(k, y) for k in range(top + 1))


def build_kernel(taper_width: float | Fraction = 4) -> KernelFamily:
    """Kernel pieces resolving ``1/y`` on ``0 < |y| < 1`` with ``supp psi`` in ``2 < |y| < 8``."""
    w = float(taper_width)
    if not 0 < w <= 4:
        raise ValueError("taper must lie in (0, 4] so that theta = 1 on |y| <= 4")
    kern = KernelFamily(w)
    probe = np.concatenate([np.linspace(-12, 12, 4801), np.linspace(-2, 2, 101)])
    outside = (np.abs(probe) <= 2) | (np.abs(probe) >= 8)
    if np.max(np.abs(kern.psi(probe[outside]))) > 1e-14:
        raise ValueError("psi leaks outside 2 < |y| < 8")
    if np.max(np.abs(kern.psi(probe) + kern.psi(-probe))) > 1e-14:
        raise ValueError("psi is not odd")
    return kern


def _check_band(f: GridFunction, n: int) -> None:
    half = f.size // 2
    if not -half <= n < half:
        raise ValueError(f"frequency {n} outside the band [-{half}, {half})")


def modulated_hilbert(f: GridFunction, n: int) -> GridFunction:
    """Fourier multiplier ``m -> -i sgn(m - n)`` with ``sgn(0) = 0``."""
    _check_band(f, n)
    mult = -1j * np.sign(f.frequencies - n)
    return GridFunction.from_coeffs(f.coeffs * mult)


def _all_moduli(f: GridFunction, seq: LacunarySequence) -> np.ndarray:
    """``|H_{n_j} f|`` stacked over the in-band terms, shape ``(J, 2**L)``."""
    terms = seq.truncate(f.size // 2).terms
    # H_n f = -i (S_{>n} - S_{<n}); build from the centered coefficient array
    m = f.frequencies
    out = np.empty((len(terms), f.size))
    for row, n in enumerate(terms):
        mult = -1j * np.sign(m - n)
        out[row] = np.abs(np.fft.ifft(np.fft.ifftshift(f.coeffs * mult)) * f.size)
    return out


def carleson_sup(f: GridFunction, seq: LacunarySequence) -> GridFunction:
    """Pointwise ``max_j |H_{n_j} f|`` over the terms inside the band."""
    return GridFunction.from_values(_all_moduli(f, seq).max(axis=0))


@dataclass(frozen=True, eq=False)
class Linearizer:
    """Selector ``N(x) = terms[choice[x]]`` on the ``2**L`` grid (``choice`` is 0-based)."""

    grid_level: int
    choice: np.ndarray
    terms: tuple[int, ...]

    def __post_init__(self) -> None:
        c = np.asarray(self.choice, dtype=np.int64)
        if c.shape != (1 << self.grid_level,):
            raise ValueError("choice must have one entry per grid point")
        if c.size and (c.min() < 0 or c.max() >= len(self.terms)):
            raise ValueError("choice indexes outside the sequence")
        object.__setattr__(self, "choice", c)

    @property
    def values(self) -> np.ndarray:
        """``N(x)`` at every grid point."""
        return np.asarray(self.terms, dtype=np.int64)[self.choice]

    @classmethod
    def constant(cls, grid_level: int, seq: LacunarySequence, j: int = 0) -> Linearizer:
        return cls(grid_level, np.full(1 << grid_level, j), seq.terms)

    @classmethod
    def random(cls, grid_level: int, seq: LacunarySequence, rng: np.random.Generator) -> Linearizer:
        return cls(grid_level, rng.integers(0, len(seq), 1 << grid_level), seq.terms)


def linearize(f: GridFunction, seq: LacunarySequence, rtol: float = 1e-12) -> Linearizer:
    """Smallest index attaining ``max_j |H_{n_j} f|`` at each grid point.

    Values within ``rtol`` (relative to the pointwise max, floor 1e-300) of
    the max count as attaining it, so exact ties survive FFT rounding.
    """
    trunc = seq.truncate(f.size // 2)
    mods = _all_moduli(f, trunc)
    top = mods.max(axis=0)
    tol = rtol * np.maximum(top, 1.0)
    hit = mods >= (top - tol)[None, :]
    choice = np.argmax(hit, axis=0)
    return Linearizer(f.grid_level, choice, trunc.terms)


def e_mask(p: Tile, nfun: Linearizer) -> np.ndarray:
    """Boolean mask over the grid of ``E(P) = {x in I_P : N(x) in omega_P}``."""
    iv = p.interval
    if iv.level > nfun.grid_level:
        raise ValueError("tile finer than the grid")
    out = np.zeros(1 << nfun.grid_level, dtype=bool)
    r = iv.descendants(nfun.grid_level)
    vals = nfun.values[r.start : r.stop]
    out[r.start : r.stop] = (vals >= p.omega.lo) & (vals < p.omega.hi)
    return out


def e_of(p: Tile, nfun: Linearizer) -> DyadicSet:
    return DyadicSet.from_mask(e_mask(p, nfun))


def _kernel_window(p: Tile, grid_level: int) -> np.ndarray:
    """Grid offsets ``d`` with ``psi_k(d * 2**-L)`` possibly non-zero."""
    span = 8 << (grid_level - p.scale)
    return np.arange(-span, span + 1)


def _check_operator_tile(p: Tile, grid_level: int) -> None:
    if p.interval.length > MAX_OPERATOR_LENGTH:
        raise ValueError(f"tile {p} is too coarse for torus operators")
    if p.scale > grid_level:
        raise ValueError("tile finer than the grid")


def tile_operator(
    p: Tile, f: GridFunction, nfun: Linearizer, kern: KernelFamily
) -> GridFunction:
    """``T_P f(x) = chi_E(P)(x) * sum_y exp(-2 pi i N(x) y) psi_k(x - y) f(y) h``."""
    L = f.grid_level
    _check_operator_tile(p, L)
    n = 1 << L
    h = 1.0 / n
    xs = np.flatnonzero(e_mask(p, nfun))
    out = np.zeros(n, dtype=np.complex128)
    if xs.size:
        d = _kernel_window(p, L)
        ys = (xs[:, None] - d[None, :]) % n
        kvals = kern.psi_k(p.scale, d * h)
        freq = nfun.values[xs][:, None]
        # phase exp(-2 pi i N(x) y) with y on the grid, reduced exactly mod 1
        phase = np.exp(-2j * np.pi * ((freq * ys) % n) / n)
        out[xs] = (phase * kvals[None, :] * f.values[ys]).sum(axis=1) * h
    return GridFunction.from_values(out)


def tile_adjoint(
    p: Tile, g: GridFunction, nfun: Linearizer, kern: KernelFamily
) -> GridFunction:
    """``T_P^* g(y) = sum_x exp(2 pi i N(x) y) psi_k(x - y) chi_E(P)(x) g(x) h``."""
    L = g.grid_level
    _check_operator_tile(p, L)
    n = 1 << L
    h = 1.0 / n
    xs = np.flatnonzero(e_mask(p, nfun))
    out = np.zeros(n, dtype=np.complex128)
    if xs.size:
        d = _kernel_window(p, L)
        ys = (xs[:, None] - d[None, :]) % n
        kvals = kern.psi_k(p.scale, d * h)
        freq = nfun.values[xs][:, None]
        phase = np.exp(2j * np.pi * ((freq * ys) % n) / n)
        contrib = phase * kvals[None, :] * g.values[xs][:, None] * h
        np.add.at(out, ys.ravel(), contrib.ravel())
    return GridFunction.from_values(out)


def tree_operator(
    tiles: Sequence[Tile], f: GridFunction, nfun: Linearizer, kern: KernelFamily
) -> GridFunction:
    acc = np.zeros(f.size, dtype=np.complex128)
    for p in tiles:
        acc += tile_operator(p, f, nfun, kern).values
    return GridFunction.from_values(acc)


def tree_adjoint(
    tiles: Sequence[Tile], g: GridFunction, nfun: Linearizer, kern: KernelFamily
) -> GridFunction:
    acc = np.zeros(g.size, dtype=np.complex128)
    for p in tiles:
        acc += tile_adjoint(p, g, nfun, kern).values
    return GridFunction.from_values(acc)


def adjoint_support_mask(p: Tile, grid_level: int) -> np.ndarray:
    """Grid mask of the 14 torus-wrapped adjoint support cells of ``p``."""
    cells, _ = adjoint_support(p)
    out = np.zeros(1 << grid_level, dtype=bool)
    for c in cells:
        r = c.descendants(grid_level)
        out[r.start : r.stop] = True
    return out


def linearized_adjoint(g: GridFunction, nfun: Linearizer) -> GridFunction:
    """Adjoint of ``f -> H_{N(x)} f(x)``: ``sum_j H_{n_j}^*(g * 1{N = n_j})``.

    ``H_n^*`` is the multiplier ``m -> +i sgn(m - n)``.
    """
    m = g.frequencies
    acc = np.zeros(g.size, dtype=np.complex128)
    for j, n in enumerate(nfun.terms):
        sel = nfun.choice == j
        if not sel.any():
            continue
        piece = GridFunction.from_values(np.where(sel, g.values, 0))
        acc += np.fft.ifft(np.fft.ifftshift(piece.coeffs * (1j * np.sign(m - n)))) * g.size
    return GridFunction.from_values(acc)


def fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform in natural (Sylvester) order.

    Output index ``n`` holds ``sum_t a[t] * (-1)**popcount(n & t)``.
    """
    a = np.array(a, dtype=np.float64 if np.isrealobj(a) else np.complex128)
    n = a.shape[-1]
    if n & (n - 1):
        raise ValueError("length must be a power of two")
    h = 1
    while h < n:
        a = a.reshape(-1, 2, h)
        a = np.stack((a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]), axis=1)
        h *= 2
    return a.reshape(n)


def _bit_reverse(L: int) -> np.ndarray:
    idx = np.arange(1 << L)
    rev = np.zeros_like(idx)
    for b in range(L):
        rev |= ((idx >> b) & 1) << (L - 1 - b)
    return rev


def walsh_coefficients(values: np.ndarray) -> np.ndarray:
    """``<f, w_n>`` for ``n = 0 .. 2**L - 1`` in Paley order.

    ``values[t]`` is the value of ``f`` on the cell ``[t 2**-L, (t+1) 2**-L)``.
    """
    v = np.asarray(values)
    L = v.shape[0].bit_length() - 1
    natural = fwht(v) / v.shape[0]
    # Paley index n pairs bit i of n with binary digit i+1 of x, i.e. bit L-1-i of t
    return natural[_bit_reverse(L)]


def _walsh_synthesis(coeffs: np.ndarray) -> np.ndarray:
    L = coeffs.shape[0].bit_length() - 1
    natural = np.empty_like(coeffs)
    natural[_bit_reverse(L)] = coeffs
    return fwht(natural)


def walsh_partial_sum(f: GridFunction, n: int) -> GridFunction:
    """``W_n f = sum_{k <= n} <f, w_k> w_k`` on the dyadic grid."""
    if not 0 <= n < f.size:
        raise ValueError(f"n = {n} outside [0, 2^L)")
    c = walsh_coefficients(f.values)
    c[n + 1 :] = 0
    return GridFunction.from_values(_walsh_synthesis(c))


def walsh_carleson(f: GridFunction, seq: LacunarySequence) -> GridFunction:
    """Pointwise ``max_j |W_{n_j} f|`` over the terms below ``2**L``."""
    c = walsh_coefficients(f.values)
    best = np.zeros(f.size)
    for n in seq.terms:
        if n >= f.size:
            break
        part = c.copy()
        part[n + 1 :] = 0
        best = np.maximum(best, np.abs(_walsh_synthesis(part)))
    return GridFunction.from_values(best)


def dyadic_averages(values: np.ndarray, level: int) -> np.ndarray:
    """Replace each level-``level`` cell by its mean (grid resolution unchanged)."""
    v = np.asarray(values)
    n = v.shape[0]
    blocks = v.reshape(1 << level, n >> level)
    return np.repeat(blocks.mean(axis=1), n >> level)
