"""Tile classification, mass and F-mass partitions, trees and foliation layers.

A :class:`TileUniverse` enumerates every tile ``[omega, I]`` with scale in
``[k_min, k_max]`` and ``omega`` meeting ``[0, band_max)``. Tiles are
numbered ``0 .. len(u) - 1`` and most per-tile quantities are stored as flat
numpy arrays indexed by that id. All measures are integers in units of one
grid cell ``2**-L``, so every comparison below is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .carleson import LacunarySequence, Linearizer
from .dyadic import DyadicInterval, Tile, dilate, torus_contains
from .setmodel import DyadicSet, k_F, level_sets
from .tfr import TfrForest, base_of

__all__ = [
    "TileUniverse",
    "TileClass",
    "TreeFamily",
    "SetResolution",
    "classify_tiles",
    "f_mass_levels",
    "f_mass_partition",
    "f_mass_predicate",
    "mass",
    "mass_values",
    "mass_partition",
    "mass_class",
    "tree_decompose",
    "decompose_all",
    "star_foliation",
    "layer_overlap",
    "selected_tops",
    "set_resolution",
    "tile_record",
    "families_to_json",
]

# Half-width of I~ = 17 I in units of |I|, and of 5 I~ = 85 I in units of |I|/2.
TILDE_REACH = 8
FIVE_TILDE_HALF = 85


@dataclass(eq=False)
class TileUniverse:
    """Finite tile family together with the set and linearizer it is tested against."""

    grid_level: int
    seq: LacunarySequence
    f: DyadicSet
    nfun: Linearizer
    k_min: int
    k_max: int
    band_max: int
    scale_gap: int | None = None
    scales: tuple[int, ...] = ()
    offsets: dict[int, int] = field(default_factory=dict)
    n_omega: dict[int, int] = field(default_factory=dict)
    scale: np.ndarray = field(default=None, repr=False)
    omega_index: np.ndarray = field(default=None, repr=False)
    interval_index: np.ndarray = field(default=None, repr=False)
    e_count: np.ndarray = field(default=None, repr=False)
    tilde_f: np.ndarray = field(default=None, repr=False)
    f_cells: np.ndarray = field(default=None, repr=False)

    @classmethod
    def build(
        cls,
        f: DyadicSet,
        nfun: Linearizer,
        seq: LacunarySequence,
        k_min: int = 5,
        k_max: int | None = None,
        band_max: int | None = None,
        scale_gap: int | None = None,
    ) -> TileUniverse:
        """Enumerate the universe; ``scale_gap`` keeps only every ``gap``-th scale."""
        L = nfun.grid_level
        if f.level > L:
            raise ValueError(f"set resolution 2^-{f.level} is finer than the grid 2^-{L}")
        k_max = L - 2 if k_max is None else k_max
        band_max = 1 << (L - 1) if band_max is None else band_max
        if k_min < 5:
            raise ValueError("scales coarser than 5 make 17 I overlap itself on the torus")
        if not k_min <= k_max <= L:
            raise ValueError(f"empty or over-fine scale range [{k_min}, {k_max}]")
        scales = tuple(range(k_min, k_max + 1))
        if scale_gap:
            scales = tuple(k for k in scales if (k - k_min) % scale_gap == 0)
        u = cls(L, seq, f, nfun, k_min, k_max, band_max, scale_gap, scales)
        u._enumerate()
        return u

    def _enumerate(self) -> None:
        L = self.grid_level
        sc, om, iv, ec, tf = [], [], [], [], []
        mask = self.f.mask(L).astype(np.int64)
        self.f_cells = mask
        nvals = self.nfun.values
        grid = np.arange(1 << L)
        total = 0
        for k in self.scales:
            n_om = -(-self.band_max // (1 << k))
            n_iv = 1 << k
            self.offsets[k] = total
            self.n_omega[k] = n_om
            sc.append(np.full(n_om * n_iv, k, dtype=np.int64))
            om.append(np.repeat(np.arange(n_om), n_iv))
            iv.append(np.tile(np.arange(n_iv), n_om))
            # |E(P)| for every tile at this scale in one bincount
            jw = nvals >> k
            ok = (nvals >= 0) & (jw < n_om)
            flat = jw[ok] * n_iv + (grid[ok] >> (L - k))
            ec.append(np.bincount(flat, minlength=n_om * n_iv))
            # |I~ n F|: sum of the 17 cells centred on I, wrapped around the torus
            cells = mask.reshape(n_iv, -1).sum(axis=1)
            tilde = sum(np.roll(cells, -d) for d in range(-TILDE_REACH, TILDE_REACH + 1))
            tf.append(np.tile(tilde, n_om))
            total += n_om * n_iv
        self.scale = np.concatenate(sc)
        self.omega_index = np.concatenate(om)
        self.interval_index = np.concatenate(iv)
        self.e_count = np.concatenate(ec)
        self.tilde_f = np.concatenate(tf)

    def __len__(self) -> int:
        return int(self.scale.size)

    def tile(self, tid: int) -> Tile:
        return Tile.make(int(self.scale[tid]), int(self.omega_index[tid]), int(self.interval_index[tid]))

    def tiles(self, ids: Iterable[int] | None = None) -> list[Tile]:
        ids = range(len(self)) if ids is None else ids
        return [self.tile(int(t)) for t in ids]

    def id_of(self, p: Tile) -> int:
        k = p.scale
        if k not in self.offsets or not 0 <= p.omega.index < self.n_omega[k]:
            raise KeyError(f"{p} is not in the universe")
        return self.offsets[k] + p.omega.index * (1 << k) + p.interval.index

    def ids_at_scale(self, k: int) -> slice:
        start = self.offsets[k]
        return slice(start, start + self.n_omega[k] * (1 << k))

    def cell_units(self, k: np.ndarray | int) -> np.ndarray:
        """``|I|`` in grid cells for tiles of scale ``k``."""
        return np.left_shift(1, self.grid_level - np.asarray(k))

    def e_measure(self, tid: int) -> Fraction:
        return Fraction(int(self.e_count[tid]), 1 << self.grid_level)

    def tilde_measure(self, tid: int) -> Fraction:
        return Fraction(int(self.tilde_f[tid]), 1 << self.grid_level)


@dataclass(frozen=True)
class TileClass:
    """Partition of the universe into cluster, separated and null tiles (id arrays)."""

    cluster: np.ndarray
    sep: np.ndarray
    zero: np.ndarray
    label: np.ndarray = field(repr=False)
    freq_index: np.ndarray = field(repr=False)

    CLUSTER = 1
    SEP = 2
    ZERO = 0


def classify_tiles(u: TileUniverse) -> TileClass:
    """Cluster if ``0`` lies in ``c(alpha) * omega``, else separated if some ``n_j`` lies in ``omega``.

    ``freq_index[t]`` is the (0-based) index of the smallest ``n_j`` in
    ``omega_t`` for separated tiles and ``-1`` otherwise.
    """
    c = u.seq.cluster_constant
    k = u.scale
    lo = u.omega_index << k
    width = np.left_shift(1, k)
    # 0 in the open interval (centre - c|w|/2, centre + c|w|/2), with centre = lo + |w|/2 >= 0
    cluster = 2 * lo + width < c * width
    terms = np.asarray(u.seq.terms, dtype=np.int64)
    first = np.searchsorted(terms, lo, side="left")
    padded = np.append(terms, np.iinfo(np.int64).max)
    hit = padded[first] < lo + width
    sep = hit & ~cluster
    label = np.where(cluster, TileClass.CLUSTER, np.where(sep, TileClass.SEP, TileClass.ZERO))
    freq_index = np.where(sep, first, -1)
    out = TileClass(
        np.flatnonzero(cluster), np.flatnonzero(sep), np.flatnonzero(label == 0), label, freq_index
    )
    assert out.cluster.size + out.sep.size + out.zero.size == len(u)
    return out


def f_mass_predicate(p: Tile, family: Sequence[DyadicInterval]) -> bool:
    """Whether some ``I`` in ``family`` has ``5 I~_P`` inside ``200 I`` (on the torus) and ``|I_P| <= |I|``."""
    inner = dilate(p.interval, 5 * 17)
    return any(
        p.interval.length <= i.length and torus_contains(dilate(i, 200), inner) for i in family
    )


def f_mass_levels(u: TileUniverse) -> np.ndarray:
    """Smallest ``k`` for which each tile's time interval satisfies the F-mass predicate.

    The predicate depends on ``I_P`` only; the value is ``0`` if no level works
    (impossible when ``|F| > 0``, since the last level set is ``{[0, 1)}``).
    """
    kf = k_F(u.f)
    out = np.zeros(len(u), dtype=np.int64)
    for k in u.scales:
        n_iv = 1 << k
        best = np.zeros(n_iv, dtype=np.int64)
        for m in range(1, kf + 1):
            todo = best == 0
            if not todo.any():
                break
            covered = np.zeros(n_iv + 1, dtype=np.int64)
            for i in level_sets(u.f, m).intervals:
                if i.level > k:
                    continue
                if (1 << i.level) <= 200:
                    covered[0] += 1  # 200 I wraps the whole torus
                    covered[n_iv] -= 1
                    continue
                scale_up = 1 << (k - i.level)
                c_i = (2 * i.index + 1) * scale_up
                half = 200 * scale_up - FIVE_TILDE_HALF
                # tiles with |(2 j + 1) - c_i| <= half (mod period)
                lo = -(-(c_i - half - 1) // 2)
                hi = (c_i + half - 1) // 2
                if hi - lo + 1 >= n_iv:
                    covered[0] += 1
                    covered[n_iv] -= 1
                    continue
                a, b = lo % n_iv, hi % n_iv
                if a <= b:
                    covered[a] += 1
                    covered[b + 1] -= 1
                else:
                    covered[a] += 1
                    covered[n_iv] -= 1
                    covered[0] += 1
                    covered[b + 1] -= 1
            hit = np.cumsum(covered[:n_iv]) > 0
            best[todo & hit] = m
        sl = u.ids_at_scale(k)
        out[sl] = best[u.interval_index[sl]]
    return out


def f_mass_partition(u: TileUniverse, classes: TileClass | None = None) -> dict[int, list[Tile]]:
    """``k -> P^k``: separated tiles grouped by their F-mass level."""
    classes = classify_tiles(u) if classes is None else classes
    levels = f_mass_levels(u)
    out: dict[int, list[Tile]] = {}
    for tid in classes.sep:
        out.setdefault(int(levels[tid]), []).append(u.tile(int(tid)))
    return dict(sorted(out.items()))


def mass_values(u: TileUniverse, classes: TileClass, levels: np.ndarray) -> np.ndarray:
    """``A(P)`` for every separated tile (``nan`` elsewhere).

    ``A(P)`` is the max of ``|E(P')| / |I'|`` over separated ``P' >= P`` in the
    same F-mass class. Computed by dynamic programming from coarse to fine
    scales: the tiles immediately above ``[omega, I]`` are the two tiles with
    time interval ``parent(I)`` and frequency intervals the halves of ``omega``.
    """
    ratio = u.e_count / u.cell_units(u.scale).astype(np.float64)
    is_sep = classes.label == TileClass.SEP
    out = np.full(len(u), np.nan)
    for m in np.unique(levels[is_sep]):
        own = np.where(is_sep & (levels == m), ratio, -np.inf)
        prev = None
        prev_k = None
        for k in u.scales:
            sl = u.ids_at_scale(k)
            grid = own[sl].reshape(u.n_omega[k], 1 << k)
            if prev is not None and prev_k == k - 1:
                j = np.arange(u.n_omega[k])
                i = np.arange(1 << k) >> 1
                lo_half = prev[np.minimum(2 * j, prev.shape[0] - 1)][:, i]
                hi_half = prev[np.minimum(2 * j + 1, prev.shape[0] - 1)][:, i]
                grid = np.maximum(grid, np.maximum(lo_half, hi_half))
            elif prev is not None:
                grid = np.maximum(grid, _ancestor_max(prev, prev_k, k, u.n_omega[k]))
            prev, prev_k = grid, k
            vals = grid.ravel()
            sel = is_sep[sl] & (levels[sl] == m)
            out[sl] = np.where(sel, vals, out[sl])
    return out


def _ancestor_max(prev: np.ndarray, kp: int, k: int, n_om: int) -> np.ndarray:
    """Max of ``prev`` over all scale-``kp`` tiles above each scale-``k`` tile."""
    d = k - kp
    j = np.arange(n_om)
    i = np.arange(1 << k) >> d
    best = np.full((n_om, 1 << k), -np.inf)
    for r in range(1 << d):
        rows = np.minimum((j << d) + r, prev.shape[0] - 1)
        best = np.maximum(best, prev[rows][:, i])
    return best


def mass(p: Tile, u: TileUniverse, classes: TileClass | None = None) -> Fraction:
    """Exact ``A(P)`` for a single separated tile by direct enumeration of ``P' >= P``."""
    classes = classify_tiles(u) if classes is None else classes
    levels = f_mass_levels(u)
    tid = u.id_of(p)
    if classes.label[tid] != TileClass.SEP:
        raise ValueError(f"{p} is not a separated tile")
    m = levels[tid]
    best = Fraction(0)
    for k in u.scales:
        if k > p.scale:
            break
        d = p.scale - k
        iv = p.interval.ancestor(k)
        for r in range(1 << d):
            j = (p.omega.index << d) + r
            if j >= u.n_omega[k]:
                continue
            q = u.offsets[k] + j * (1 << k) + iv.index
            if classes.label[q] == TileClass.SEP and levels[q] == m:
                best = max(best, Fraction(int(u.e_count[q]), 1 << (u.grid_level - k)))
    return best


def mass_class(a: float) -> int | None:
    """``n`` with ``a`` in ``(2**(-n-1), 2**-n]``; ``None`` for ``a == 0``."""
    if a == 0:
        return None
    if not 0 < a <= 1:
        raise ValueError(f"mass {a} outside (0, 1]")
    mant, exp = np.frexp(a)
    return int(1 - exp) if mant == 0.5 else int(-exp)


def mass_partition(
    u: TileUniverse, classes: TileClass | None = None
) -> tuple[dict[tuple[int, int], list[int]], list[int], np.ndarray, np.ndarray]:
    """Group separated tiles by ``(k, n)``.

    Returns ``(groups, massless, levels, n_of)`` where ``groups[(k, n)]`` lists
    tile ids of ``P_n^k``, ``massless`` the ids with ``A(P) = 0``, and
    ``levels`` / ``n_of`` the per-tile F-mass and mass classes (``-1`` when
    undefined).
    """
    classes = classify_tiles(u) if classes is None else classes
    levels = f_mass_levels(u)
    a = mass_values(u, classes, levels)
    n_of = np.full(len(u), -1, dtype=np.int64)
    groups: dict[tuple[int, int], list[int]] = {}
    massless: list[int] = []
    for tid in classes.sep:
        n = mass_class(float(a[tid]))
        if n is None:
            massless.append(int(tid))
            continue
        n_of[tid] = n
        groups.setdefault((int(levels[tid]), n), []).append(int(tid))
    return dict(sorted(groups.items())), massless, levels, n_of


@dataclass
class TreeFamily:
    """A tree: ``members`` all lie below ``top`` and form a convex family."""

    top: Tile
    members: list[Tile]
    l: int
    n: int | None = None
    m: int | None = None
    p: int | None = None

    def tilde(self) -> tuple[Fraction, Fraction]:
        t = dilate(self.top.interval, 17)
        return t.lo, t.hi


def _tree_order(tiles: Sequence[Tile]) -> list[Tile]:
    # decreasing |I|, then leftmost interval, then lowest frequency
    return sorted(tiles, key=lambda t: (t.scale, t.interval.index, t.omega.index))


def tree_decompose(
    tiles: Sequence[Tile], l: int, n: int | None = None, m: int | None = None
) -> list[TreeFamily]:
    """Split tiles of one ``(l, m, n)`` class into maximal trees.

    Repeatedly take the remaining tile with the largest time interval as a top
    and collect every remaining tile below it.
    """
    remaining = _tree_order(tiles)
    taken: set[Tile] = set()
    out: list[TreeFamily] = []
    for top in remaining:
        if top in taken:
            continue
        members = [
            q
            for q in remaining
            if q not in taken and top.interval.contains(q.interval) and q.omega.contains(top.omega)
        ]
        taken.update(members)
        out.append(TreeFamily(top, members, l, n, m))
    return out


def decompose_all(
    u: TileUniverse, classes: TileClass | None = None
) -> dict[tuple[int, int], list[TreeFamily]]:
    """Maximal uniform ``(l, m, n)`` trees of all massive separated tiles, keyed by ``(l, n)``."""
    classes = classify_tiles(u) if classes is None else classes
    groups, _, levels, n_of = mass_partition(u, classes)
    buckets: dict[tuple[int, int, int], list[Tile]] = {}
    for (m, n), ids in groups.items():
        for tid in ids:
            l = int(classes.freq_index[tid])
            buckets.setdefault((l, n, m), []).append(u.tile(tid))
    out: dict[tuple[int, int], list[TreeFamily]] = {}
    for (l, n, m), tiles in sorted(buckets.items()):
        out.setdefault((l, n), []).extend(tree_decompose(tiles, l, n, m))
    return out


def _tilde_pieces(p: Tile, level: int) -> list[tuple[int, int]]:
    """``17 I_P`` on the torus as half-open integer ranges of level-``level`` cells."""
    d = level - p.scale
    period = 1 << level
    start = ((p.interval.index - TILDE_REACH) << d) % period
    stop = start + (17 << d)
    if stop <= period:
        return [(start, stop)]
    return [(start, period), (0, stop - period)]


def _merge(pieces: list[tuple[int, int]]) -> list[tuple[int, int]]:
    out: list[tuple[int, int]] = []
    for a, b in sorted(pieces):
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def _covered(target: list[tuple[int, int]], union: list[tuple[int, int]]) -> bool:
    """Whether every target range lies inside the merged ``union``."""
    for a, b in target:
        if not any(u <= a and b <= v for u, v in union):
            return False
    return True


def _overlaps(x: list[tuple[int, int]], y: list[tuple[int, int]]) -> bool:
    return any(a < d and c < b for a, b in x for c, d in y)


def _select_round(
    trees: Sequence[TreeFamily], remaining: Sequence[int], level: int
) -> list[int]:
    """Trees whose ``I~`` is not covered by the ``I~`` of strictly larger remaining tops."""
    by_scale: dict[int, list[int]] = {}
    for t in remaining:
        by_scale.setdefault(trees[t].top.scale, []).append(t)
    union: list[tuple[int, int]] = []
    selected = []
    for k in sorted(by_scale):
        pieces = {t: _tilde_pieces(trees[t].top, level) for t in by_scale[k]}
        selected += [t for t in by_scale[k] if not _covered(pieces[t], union)]
        union = _merge(union + [r for ps in pieces.values() for r in ps])
    return selected


def star_foliation(trees: Sequence[TreeFamily], max_layers: int | None = None) -> list[int]:
    """Assign a layer ``p >= 1`` to every tree of one ``(l, n)`` class.

    In each round a remaining tree is selected when its ``I~`` is not covered
    by the ``I~`` of strictly larger remaining tops. Each selected tree absorbs
    every remaining tree whose ``I~`` overlaps its own in positive length and
    whose top is no larger; selected and absorbed trees get the current layer.
    The layers are also stored on the trees.
    """
    if not trees:
        return []
    level = max(t.top.scale for t in trees)
    pieces = [_tilde_pieces(t.top, level) for t in trees]
    remaining = list(range(len(trees)))
    layer = [0] * len(trees)
    p = 0
    while remaining:
        p += 1
        if max_layers is not None and p > max_layers:
            raise AssertionError(f"foliation did not terminate within {max_layers} layers")
        selected = _select_round(trees, remaining, level)
        absorbed = set(selected)
        for s in selected:
            for t in remaining:
                if t in absorbed or trees[t].top.scale < trees[s].top.scale:
                    continue
                if _overlaps(pieces[s], pieces[t]):
                    absorbed.add(t)
        for t in absorbed:
            layer[t] = p
        remaining = [t for t in remaining if t not in absorbed]
    for t, tr in zip(layer, trees):
        tr.p = t
    return layer


def selected_tops(trees: Sequence[TreeFamily]) -> list[Tile]:
    """Tops of the trees selected (not merely absorbed) in the first round."""
    if not trees:
        return []
    level = max(t.top.scale for t in trees)
    return [trees[t].top for t in _select_round(trees, range(len(trees)), level)]


def layer_overlap(tops: Sequence[Tile]) -> int:
    """``max_x sum_P chi_{I~_P}(x)`` over the given tops."""
    if not tops:
        return 0
    level = max(t.scale for t in tops)
    events: dict[int, int] = {}
    for t in tops:
        for a, b in _tilde_pieces(t, level):
            events[a] = events.get(a, 0) + 1
            events[b] = events.get(b, 0) - 1
    best = run = 0
    for x in sorted(events):
        run += events[x]
        best = max(best, run)
    return best


@dataclass
class SetResolution:
    """Set-resolution tile families attached to the regularization tiles of ``F``."""

    family1: dict[tuple[int, DyadicInterval], np.ndarray]
    family2: dict[tuple[int, DyadicInterval], np.ndarray]
    f_null: np.ndarray
    k_f: int

    def union_mask(self, size: int) -> np.ndarray:
        mask = np.zeros(size, dtype=bool)
        for fam in (self.family1, self.family2):
            for ids in fam.values():
                mask[ids] = True
        mask[self.f_null] = True
        return mask


def _tilde_meets(u: TileUniverse, ids: np.ndarray, iv: DyadicInterval) -> np.ndarray:
    """Positive-length overlap of ``I~_P`` with ``iv`` on the torus, per tile id."""
    L = u.grid_level
    period = 1 << L
    k = u.scale[ids]
    size = np.left_shift(1, L - k)
    lo_p = (u.interval_index[ids] - TILDE_REACH) * size
    len_p = 17 * size
    r = iv.descendants(L)
    a, len_i = r.start, r.stop - r.start
    return ((a - lo_p) % period < len_p) | ((lo_p - a) % period < len_i)


def set_resolution(
    u: TileUniverse,
    forests: Sequence[TfrForest],
    classes: TileClass | None = None,
    levels: np.ndarray | None = None,
) -> SetResolution:
    """Build ``p_k^1[R]``, ``p_k^2[R]`` and ``P[F, 0]`` (as tile-id arrays).

    Raises ``ValueError`` if the forests were not built from ``u.f``.
    """
    kf = k_F(u.f)
    if len(forests) != kf:
        raise ValueError(f"expected {kf} forests for this set, got {len(forests)}")
    for fr in forests:
        if set(fr.roots) != set(level_sets(u.f, fr.k).intervals):
            raise ValueError(f"forest k={fr.k} does not match the set of the universe")
    classes = classify_tiles(u) if classes is None else classes
    levels = f_mass_levels(u) if levels is None else levels
    sep = classes.sep
    lo = u.omega_index << u.scale
    fam1: dict[tuple[int, DyadicInterval], np.ndarray] = {}
    fam2: dict[tuple[int, DyadicInterval], np.ndarray] = {}
    # the k = 1 families are extra sets and stay in force when k_F = 1 too;
    # otherwise a set with |F| > 1/2 would leave P^1 uncovered
    pool1 = sep[(levels[sep] == 1) | (levels[sep] == 2)]
    for top in forests[0].roots:
        top_freq = 1 << top.level
        near = sep[_tilde_meets(u, sep, top)]
        fam2[(1, top)] = near[lo[near] >= top_freq]
        near1 = pool1[_tilde_meets(u, pool1, top)]
        fam1[(1, top)] = near1[lo[near1] < top_freq]
    for k in range(2, kf):
        fr = forests[k - 1]
        above = sep[levels[sep] > k]
        next_level = sep[levels[sep] == k + 1]
        for top in fr.roots:
            near = next_level[_tilde_meets(u, next_level, top)]
            fam1[(k, top)] = near[lo[near] < (1 << top.level)]
        near_cache: dict[DyadicInterval, np.ndarray] = {}
        for r in fr.non_root_tiles():
            root, _ = fr.locate(r)
            if root not in near_cache:
                near_cache[root] = above[_tilde_meets(u, above, root)]
            near = near_cache[root]
            base = base_of(r, fr)
            keep = (lo[near] >= base.top_frequency) & (lo[near] < r.top_frequency)
            fam2[(k, r.interval)] = near[keep]
    f_null = sep[u.tilde_f[sep] == 0]
    return SetResolution(fam1, fam2, f_null, kf)


def tile_record(p: Tile) -> dict:
    return {"k": p.scale, "omega_index": p.omega.index, "interval_index": p.interval.index}


def families_to_json(trees: Iterable[TreeFamily]) -> str:
    """Dump tree families as ``{l, n, m, p, top, members}`` records."""
    recs = [
        {
            "l": t.l,
            "n": t.n,
            "m": t.m,
            "p": t.p,
            "top": tile_record(t.top),
            "members": [tile_record(q) for q in t.members],
        }
        for t in trees
    ]
    return json.dumps(recs, indent=1, sort_keys=True)
