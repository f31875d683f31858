import json
from fractions import Fraction as Fr

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tilelab.carleson import LacunarySequence, Linearizer
from tilelab.dyadic import CZError, Tile, adjoint_support, cz_decompose, dilate, tile_leq
from tilelab.setmodel import DyadicSet, k_F, level_sets, random_dyadic_set
from tilelab.tfr import tfr_global
from tilelab.tilealg import (
    TileClass,
    TileUniverse,
    TreeFamily,
    classify_tiles,
    decompose_all,
    f_mass_levels,
    f_mass_partition,
    f_mass_predicate,
    families_to_json,
    layer_overlap,
    mass,
    mass_class,
    mass_partition,
    mass_values,
    selected_tops,
    set_resolution,
    star_foliation,
    tree_decompose,
)

SEQ = LacunarySequence.powers(11)
seeds = st.integers(0, 2**32 - 1)


def _universe(seed, L=12, f=None, seq=SEQ):
    rng = np.random.default_rng(seed)
    f = random_dyadic_set(rng, min(L, 9)) if f is None else f
    return TileUniverse.build(f, Linearizer.random(L, seq.truncate(1 << (L - 1)), rng), seq.truncate(1 << (L - 1)))


class TestUniverse:
    def test_ids_round_trip(self):
        u = _universe(0)
        for tid in (0, 17, len(u) // 2, len(u) - 1):
            assert u.id_of(u.tile(tid)) == tid

    def test_counts_match_direct(self):
        u = _universe(1)
        mask = u.f.mask(u.grid_level)
        rng = np.random.default_rng(5)
        for tid in rng.integers(0, len(u), 40):
            p = u.tile(int(tid))
            r = p.interval.descendants(u.grid_level)
            vals = u.nfun.values[r.start : r.stop]
            assert u.e_count[tid] == np.sum((vals >= p.omega.lo) & (vals < p.omega.hi))
            cells = 1 << (u.grid_level - p.scale)
            idx = np.arange(r.start - 8 * cells, r.stop + 8 * cells) % (1 << u.grid_level)
            assert u.tilde_f[tid] == mask[idx].sum()

    def test_rejects(self):
        rng = np.random.default_rng(0)
        nfun = Linearizer.random(8, SEQ.truncate(128), rng)
        with pytest.raises(ValueError):
            TileUniverse.build(DyadicSet(9, (0,)), nfun, SEQ)
        with pytest.raises(ValueError):
            TileUniverse.build(DyadicSet(4, (0,)), nfun, SEQ, k_min=4)

    def test_scale_gap(self):
        rng = np.random.default_rng(0)
        nfun = Linearizer.random(20, SEQ, rng)
        u = TileUniverse.build(DyadicSet(4, (0,)), nfun, SEQ, k_max=16, band_max=64, scale_gap=10)
        assert u.scales == (5, 15)


class TestClassify:
    def test_cluster_constant_example(self):
        # omega = [4, 8), c = 20: the dilate (-34, 46) holds 0
        lo, width, c = 4, 4, SEQ.cluster_constant
        assert c == 20 and 2 * lo + width < c * width

    def test_scale_five_rows(self):
        u = _universe(0, L=12)
        cls = classify_tiles(u)
        for j in range(u.n_omega[5]):
            tid = u.id_of(Tile.make(5, j, 3))
            if j <= 9:  # 2*32j + 32 < 640
                assert cls.label[tid] == TileClass.CLUSTER
            elif j in (16,):  # holds 512 = 2**9
                assert cls.label[tid] == TileClass.SEP and cls.freq_index[tid] == 8
            elif j in (10, 11, 12):
                assert cls.label[tid] == TileClass.ZERO

    @settings(max_examples=15, deadline=None)
    @given(seeds)
    def test_partition_and_null_tiles(self, seed):
        u = _universe(seed)
        cls = classify_tiles(u)
        ids = np.concatenate([cls.cluster, cls.sep, cls.zero])
        assert np.array_equal(np.sort(ids), np.arange(len(u)))
        assert np.all(u.e_count[cls.zero] == 0)
        for tid in cls.sep[:50]:
            p = u.tile(int(tid))
            assert p.omega.lo <= u.seq.terms[cls.freq_index[tid]] < p.omega.hi


class TestFMass:
    def test_full_torus(self):
        u = _universe(0, f=DyadicSet(3, tuple(range(8))))
        cls = classify_tiles(u)
        assert set(f_mass_partition(u, cls)) == {1}

    def test_quarter_against_brute_force(self):
        u = _universe(0, f=DyadicSet(2, (0,)))
        levels = f_mass_levels(u)
        fams = {m: level_sets(u.f, m).intervals for m in range(1, k_F(u.f) + 1)}
        for tid in range(len(u)):
            p = u.tile(tid)
            want = next(m for m in sorted(fams) if f_mass_predicate(p, fams[m]))
            assert levels[tid] == want

    @settings(max_examples=8, deadline=None)
    @given(seeds)
    def test_random_against_brute_force(self, seed):
        u = _universe(seed)
        levels = f_mass_levels(u)
        fams = {m: level_sets(u.f, m).intervals for m in range(1, k_F(u.f) + 1)}
        rng = np.random.default_rng(seed)
        for tid in rng.integers(0, len(u), 200):
            p = u.tile(int(tid))
            want = next(m for m in sorted(fams) if f_mass_predicate(p, fams[m]))
            assert levels[tid] == want

    @settings(max_examples=10, deadline=None)
    @given(seeds)
    def test_tilde_density(self, seed):
        u = _universe(seed, L=12)
        cls = classify_tiles(u)
        levels = f_mass_levels(u)
        sep = cls.sep
        # |I~_P n F| < 2**(10 - k) |I_P| in grid cells
        bound = np.ldexp(u.cell_units(u.scale[sep]).astype(float), 10 - levels[sep])
        assert np.all(u.tilde_f[sep] < bound)


class TestMass:
    def test_mass_class(self):
        assert mass_class(1.0) == 0
        assert mass_class(0.5) == 1
        assert mass_class(0.3) == 1
        assert mass_class(0.25) == 2
        assert mass_class(0.0) is None
        with pytest.raises(ValueError):
            mass_class(1.5)

    @staticmethod
    def _constant_top():
        seq = SEQ.truncate(2048)  # top term 1024
        nfun = Linearizer.constant(12, seq, j=len(seq) - 1)
        return TileUniverse.build(DyadicSet(4, (3,)), nfun, seq)

    def test_all_empty(self):
        # omega_P misses 1024, so does every omega above P: no tile above P has a non-empty E
        u = self._constant_top()
        cls = classify_tiles(u)
        a = mass_values(u, cls, f_mass_levels(u))
        away = [t for t in cls.sep if not u.tile(int(t)).omega.lo <= 1024 < u.tile(int(t)).omega.hi]
        assert away and all(a[t] == 0 for t in away)
        assert all(mass(u.tile(int(t)), u, cls) == 0 for t in away[:20])

    def test_maximal_full_tile(self):
        u = self._constant_top()
        cls = classify_tiles(u)
        p = Tile.make(5, 1024 >> 5, 7)
        tid = u.id_of(p)
        assert cls.label[tid] == TileClass.SEP
        assert mass(p, u, cls) == 1

    @settings(max_examples=8, deadline=None)
    @given(seeds)
    def test_dp_matches_brute_force(self, seed):
        u = _universe(seed)
        cls = classify_tiles(u)
        a = mass_values(u, cls, f_mass_levels(u))
        rng = np.random.default_rng(seed)
        for tid in rng.choice(cls.sep, size=min(60, cls.sep.size), replace=False):
            assert a[tid] == float(mass(u.tile(int(tid)), u, cls))

    def test_non_separated(self):
        u = _universe(0)
        cls = classify_tiles(u)
        with pytest.raises(ValueError):
            mass(u.tile(int(cls.cluster[0])), u, cls)

    @settings(max_examples=5, deadline=None)
    @given(seeds)
    def test_convexity(self, seed):
        u = _universe(seed, L=11)
        groups, _, _, _ = mass_partition(u)
        for ids in groups.values():
            members = set(u.tiles(ids))
            ordered = sorted(members, key=lambda t: t.scale)
            for lo in ordered:
                for hi in ordered:
                    if hi.scale >= lo.scale - 1 or not tile_leq(lo, hi):
                        continue
                    # every separated tile strictly between lo and hi shares the class
                    for k in range(hi.scale + 1, lo.scale):
                        d = lo.scale - k
                        mid = Tile.make(k, lo.omega.index >> d, lo.interval.ancestor(k).index)
                        if mid.omega.index < u.n_omega[k]:
                            assert mid in members


class TestTrees:
    def test_chain(self):
        chain = [Tile.make(7, 4, 12), Tile.make(6, 8, 6), Tile.make(5, 16, 3)]
        trees = tree_decompose(chain, l=0, n=1, m=1)
        assert len(trees) == 1 and trees[0].top == Tile.make(5, 16, 3)
        assert set(trees[0].members) == set(chain)

    def test_row(self):
        trees = tree_decompose([Tile.make(6, 1, 0), Tile.make(6, 1, 9)], l=0)
        assert [t.top for t in trees] == [Tile.make(6, 1, 0), Tile.make(6, 1, 9)]

    @settings(max_examples=8, deadline=None)
    @given(seeds)
    def test_maximality_audit(self, seed):
        u = _universe(seed)
        cls = classify_tiles(u)
        groups, _, levels, n_of = mass_partition(u, cls)
        for (l, n), trees in decompose_all(u, cls).items():
            for t in trees:
                assert t.top in t.members
                assert all(tile_leq(q, t.top) for q in t.members)
                assert {int(cls.freq_index[u.id_of(q)]) for q in t.members} == {l}
                assert {int(n_of[u.id_of(q)]) for q in t.members} == {n}
            # no tile of the class below a top was left out of every tree
            tops = [t for t in trees]
            for t in tops:
                for tid in groups.get((t.m, n), []):
                    q = u.tile(tid)
                    if cls.freq_index[tid] == l and tile_leq(q, t.top):
                        assert any(q in s.members for s in trees)


def _tree(scale, index, omega=1):
    top = Tile.make(scale, omega, index)
    return TreeFamily(top, [top], l=0, n=0, m=1)


class TestFoliation:
    def test_disjoint_tops(self):
        trees = [_tree(6, 0), _tree(6, 20), _tree(6, 40)]
        assert star_foliation(trees) == [1, 1, 1]
        assert layer_overlap(selected_tops(trees)) == 1

    def test_nested_tops_absorbed(self):
        big, small = _tree(5, 10), _tree(8, 80)
        assert star_foliation([big, small]) == [1, 1]
        assert selected_tops([big, small]) == [big.top]

    def test_single(self):
        assert layer_overlap([Tile.make(6, 0, 3)]) == 1

    def test_overlap_count(self):
        tops = [Tile.make(6, 0, i) for i in (10, 11, 12)]
        assert layer_overlap(tops) == 3

    @settings(max_examples=8, deadline=None)
    @given(seeds)
    def test_layers_bounded(self, seed):
        u = _universe(seed, L=12)
        kf = k_F(u.f)
        for trees in decompose_all(u).values():
            layers = star_foliation(trees, max_layers=kf + 1)
            assert min(layers) == 1
            assert layer_overlap(selected_tops(trees)) <= 100

    def test_json(self):
        trees = [_tree(6, 0)]
        star_foliation(trees)
        data = json.loads(families_to_json(trees))
        assert data[0]["top"] == {"k": 6, "omega_index": 1, "interval_index": 0} and data[0]["p"] == 1


def _cz_residual_ok(u, trees, levels):
    """F-density of every CZ piece over the minimal adjoint cells of a tree in P^k stays below 2**(10-k)."""
    mask = u.f.mask(u.grid_level)
    checked = 0
    for t in trees:
        base = dilate(t.top.interval, 17)
        if base.lo < 0 or base.hi > 1:
            continue
        cells = set()
        for q in t.members:
            cells.update(adjoint_support(q)[0])
        minimal = [c for c in cells if not any(o != c and c.contains(o) for o in cells)]
        try:
            cz = cz_decompose(minimal, base)
        except (CZError, ValueError):
            continue
        k = t.m
        for iv in cz:
            r = iv.descendants(u.grid_level)
            dens = Fr(int(mask[r.start : r.stop].sum()), r.stop - r.start)
            assert dens < Fr(2) ** (10 - k)
        checked += 1
    return checked


@settings(max_examples=6, deadline=None)
@given(seeds)
def test_cz_residual_density(seed):
    u = _universe(seed, L=12)
    for trees in decompose_all(u).values():
        _cz_residual_ok(u, trees, None)


class TestSetResolution:
    @settings(max_examples=6, deadline=None)
    @given(seeds)
    def test_families(self, seed):
        u = _universe(seed)
        forests = tfr_global(u.f)
        cls = classify_tiles(u)
        res = set_resolution(u, forests, cls)
        kf = k_F(u.f)
        # the k = k_F families are empty, except that the k = 1 families always exist
        keys = set(res.family1) | set(res.family2)
        assert all(k < kf or k == 1 for k, _ in keys)
        assert {k for k, _ in keys} >= {1}
        covered = res.union_mask(len(u)) | (cls.label != TileClass.SEP)
        assert covered.all()
        # tiles of one node share their second family
        for fr in forests[1:-1]:
            for top, node in fr.nodes():
                fams = {tuple(res.family2[(fr.k, iv)].tolist()) for iv in node.c_set}
                assert len(fams) == 1

    def test_mismatched_forests(self):
        u = _universe(0, f=DyadicSet(2, (0,)))
        other = tfr_global(DyadicSet(2, (1,)))
        with pytest.raises(ValueError):
            set_resolution(u, other)
        with pytest.raises(ValueError):
            set_resolution(u, other[:1])
