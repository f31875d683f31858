import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tilelab.carleson import (
    LacunarySequence,
    Linearizer,
    build_kernel,
    e_mask,
    linearized_adjoint,
    modulated_hilbert,
    tile_adjoint,
    tree_adjoint,
)
from tilelab.dyadic import Tile
from tilelab.setmodel import GridFunction
from tilelab.tilealg import TreeFamily, layer_overlap, selected_tops, star_foliation
from tilelab.verify import (
    GOLDEN_ENV,
    ExperimentReport,
    foliation_overlap_check,
    generate_tree,
    golden_band,
    llogl_norm,
    load_golden,
    lower_bound_experiment,
    main_lemma_check,
    packing_check,
    random_antichain,
    reports_to_csv,
    reports_to_json,
    tfr_invariants_check,
    tree_l2_check,
    upper_bound_experiment,
    walsh_sharpness_experiment,
    walsh_test_function,
    zygmund_ratio,
)
from tilelab import verify

BANDS = [
    "lower_bound",
    "upper_bound",
    "zygmund_upper",
    "zygmund_cantor_lower",
    "zygmund_interval",
    "main_lemma",
    "tree_l2",
    "walsh_ratio",
    "carleson_indicator",
]


class TestReport:
    def _report(self):
        rep = ExperimentReport("demo", {"seed": 1}, band=(0.0, 1.0))
        rep.add("a", 0.5)
        rep.add("b", 1.0)
        return rep

    def test_pass_iff_all_rows_in_band(self):
        rep = self._report()
        assert rep.passed and rep.summary() == "demo: PASS"
        rep.add("c", 1.5)
        assert not rep.passed
        assert [r.point for r in rep.failures()] == ["c"]
        assert "1 of 3" in rep.summary()

    def test_row_specific_band(self):
        rep = self._report()
        rep.add("wide", 5.0, 0.0, 10.0)
        assert rep.passed

    def test_json(self):
        rep = self._report()
        rep.add("open", 3.0, 0.0, math.inf)
        data = json.loads(reports_to_json([rep]))
        assert data[0]["name"] == "demo" and data[0]["pass"] is True
        assert data[0]["ratios"][2]["band_hi"] == "inf"
        assert "runtime_ms" not in data[0]
        assert "runtime_ms" in json.loads(reports_to_json([rep], timings=True))[0]

    def test_csv(self):
        text = reports_to_csv([self._report()])
        lines = text.split("\n")
        assert lines[0] == "name,param_point,ratio,band_lo,band_hi,pass"
        assert lines[1].startswith("demo,a,0.5,")
        assert "\r" not in text and text.endswith("\n")


class TestGolden:
    def test_packaged_file_has_every_band(self):
        data = load_golden()
        assert set(BANDS) <= set(data["bands"])
        for name in BANDS:
            lo, hi = golden_band(name, data)
            assert lo < hi

    def test_env_override(self, tmp_path, monkeypatch):
        path = tmp_path / "g.json"
        path.write_text(json.dumps({"bands": {"tree_l2": {"lo": 0.5, "hi": None}}}))
        monkeypatch.setenv(GOLDEN_ENV, str(path))
        assert golden_band("tree_l2") == (0.5, math.inf)
        with pytest.raises(KeyError):
            golden_band("walsh_ratio")

    def test_rejects_file_without_bands(self, tmp_path):
        path = tmp_path / "g.json"
        path.write_text("{}")
        with pytest.raises(ValueError):
            load_golden(path)


class TestLowerBound:
    def test_finest_resolution_point(self):
        rep = lower_bound_experiment(range(4, 9), grid_level=12)
        assert "N=8" in [p for p, _ in rep.ratios]
        with pytest.raises(ValueError):
            lower_bound_experiment(range(4, 10), grid_level=12)

    def test_conjugate_alone_meets_lower_band(self):
        lo, _ = golden_band("lower_bound")
        rep = lower_bound_experiment(range(4, 11), grid_level=16)
        conj = [r for p, r in rep.ratios if p.endswith("conjugate")]
        assert len(conj) == 7 and min(conj) >= lo
        # the supremum dominates the single conjugate function pointwise
        sup = [r for p, r in rep.ratios if p.startswith("N=") and "," not in p]
        assert all(s >= c - 1e-12 for s, c in zip(sup, conj))


class TestUpperBound:
    def test_full_torus_denominator(self):
        assert verify._denominator(1.0) == 2.0

    def test_single_multiplier_reduction(self):
        # with N constant the linearized adjoint is one conjugate-function adjoint
        L = 10
        seq = LacunarySequence.powers(8)
        rng = np.random.default_rng(3)
        g = GridFunction.from_values(rng.normal(size=1 << L))
        out = linearized_adjoint(g, Linearizer.constant(L, seq, 0))
        assert np.allclose(out.values, -modulated_hilbert(g, seq[0]).values, atol=1e-12)
        one = linearized_adjoint(GridFunction.from_values(np.ones(1 << L)), Linearizer.constant(L, seq, 0))
        assert np.allclose(one.values, -1j)

    def test_small_run_has_every_mode(self):
        rep = upper_bound_experiment(trials=6, grid_level=10)
        modes = [p.split(",")[1] for p, _ in rep.ratios]
        assert modes == ["mode=random", "mode=dual", "mode=adversarial"] * 2
        assert all(np.isfinite(r) and r > 0 for _, r in rep.ratios)


class TestZygmund:
    @pytest.mark.parametrize("kind,big_n,s,m", [("interval", 5, 0, 3), ("interval", 4, 0, 4), ("cantor", 4, 1, 2)])
    def test_few_terms_bounded_by_one(self, kind, big_n, s, m):
        assert 0 < zygmund_ratio(kind, big_n, s, samples=2000, m_terms=m) <= 1.0

    def test_interval_in_band(self):
        lo, hi = golden_band("zygmund_interval")
        assert lo <= zygmund_ratio("interval", 4, 0, samples=20000, m_terms=4) <= hi

    def test_deterministic(self):
        a = zygmund_ratio("cantor", 3, 2, samples=1000, seed=5)
        assert a == zygmund_ratio("cantor", 3, 2, samples=1000, seed=5)

    def test_too_many_terms(self):
        with pytest.raises(ValueError):
            zygmund_ratio("cantor", 7, 4)


class TestTrees:
    def test_generated_density(self):
        rng = np.random.default_rng(11)
        for n in range(4):
            tree = generate_tree(rng, 12, n)
            for p in tree.tiles:
                frac = e_mask(p, tree.nfun).sum() / (1 << (12 - p.scale))
                assert frac <= 2.0**-n + 1e-15
            finest = max(p.scale for p in tree.tiles)
            assert all(
                e_mask(p, tree.nfun).sum() == 1 << (12 - p.scale - n) for p in tree.tiles if p.scale == finest
            )

    def test_tree_is_convex_and_below_top(self):
        tree = generate_tree(np.random.default_rng(2), 12, 1)
        for p in tree.tiles:
            assert tree.top.interval.contains(p.interval) and p.omega.contains(tree.top.omega)
            if p != tree.top:
                up = p.interval.parent()
                assert any(q.interval == up and p.omega.contains(q.omega) for q in tree.tiles)

    def test_empty_tree(self):
        g = GridFunction.from_values(np.ones(1 << 10))
        nfun = Linearizer.constant(10, LacunarySequence.powers(8))
        assert np.all(tree_adjoint([], g, nfun, build_kernel()).values == 0)

    def test_single_tile_direct_quadrature(self):
        L = 10
        n = 1 << L
        kern = build_kernel()
        tree = generate_tree(np.random.default_rng(4), L, 1, max_depth=0)
        (p,) = tree.tiles
        rng = np.random.default_rng(5)
        g = GridFunction.from_values(rng.normal(size=n) + 1j * rng.normal(size=n))
        got = tile_adjoint(p, g, tree.nfun, kern).values
        xs = np.flatnonzero(e_mask(p, tree.nfun))
        y = np.arange(n)
        want = np.zeros(n, dtype=complex)
        for x in xs:
            d = (x - y + n // 2) % n - n // 2
            want += np.exp(2j * np.pi * tree.nfun.values[x] * y / n) * kern.psi_k(p.scale, d / n) * g.values[x] / n
        assert np.max(np.abs(got - want)) < 1e-12


class TestSmallRuns:
    def test_main_lemma(self):
        rep = main_lemma_check(trials=4, grid_level=12)
        assert len(rep.rows) == 4 and rep.passed

    def test_tree_l2(self):
        rep = tree_l2_check(range(0, 3), trials=3)
        assert len(rep.rows) == 9 and rep.passed

    def test_tfr_invariants(self):
        rep = tfr_invariants_check(trials=5, level=9)
        assert rep.passed and all(r == 0 for _, r in rep.ratios)

    def test_foliation(self):
        rep = foliation_overlap_check(trials=5, adversarial=20)
        assert rep.passed

    def test_packing_deterministic(self):
        a = packing_check(trials=40, seed=7, grid_level=10)
        b = packing_check(trials=40, seed=7, grid_level=10)
        assert a.passed and reports_to_json([a]) == reports_to_json([b])


class TestPacking:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_antichain_has_no_comparable_pairs(self, seed):
        rng = np.random.default_rng(seed)
        nfun = Linearizer.random(10, LacunarySequence.powers(8), rng)
        tiles = random_antichain(rng, 10, nfun)
        for a in tiles:
            for b in tiles:
                if a is not b:
                    assert not verify._leq(a, b)

    def test_constant_n_sum_at_most_interval(self):
        L = 10
        seq = LacunarySequence.powers(8)
        nfun = Linearizer.constant(L, seq, 4)
        rng = np.random.default_rng(0)
        tiles = random_antichain(rng, L, nfun, size=30)
        top = tiles[0][1]
        count = sum(e_mask(p, nfun).astype(int) for p, _ in tiles)
        assert count.max() <= 1
        r = top.descendants(L)
        assert count[r.start : r.stop].sum() <= r.stop - r.start


class TestFoliation:
    def test_single_tree_overlap_one(self):
        p = Tile.make(5, 20, 12)
        trees = [TreeFamily(p, [p], l=0, n=0, m=1)]
        star_foliation(trees)
        assert layer_overlap(selected_tops(trees)) == 1

    def test_nested_triples_never_admitted(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            trees = verify._nested_triple_trees(rng)
            star_foliation(trees)
            assert not verify._has_nested_triple(selected_tops(trees))


class TestWalsh:
    def test_base_point(self):
        f = walsh_test_function(1, 8)
        assert np.all(f[:128] == 2.0)
        assert np.all(f[128:] < 2.0) and np.all(f[128:] >= 1.0)

    def test_cell_averages(self):
        f = walsh_test_function(3, 10)
        # integral of min(2^n, 1/x) over [0,1) is 1 + n log 2
        assert abs(f.mean() - (1 + 3 * math.log(2))) < 1e-12

    def test_llogl_of_constant(self):
        assert llogl_norm(np.ones(64)) == 2.0
        assert llogl_norm(np.full(64, 4.0)) == 8.0

    def test_small_fit_uses_oracle(self):
        rep = walsh_sharpness_experiment(range(1, 6), grid_level=10)
        err = dict(rep.ratios)["dyadic-average oracle max error"]
        assert err <= 1e-12
