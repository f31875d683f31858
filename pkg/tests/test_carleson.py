from fractions import Fraction as Fr

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tilelab.carleson import (
    LacunarySequence,
    Linearizer,
    adjoint_support_mask,
    build_kernel,
    carleson_sup,
    dyadic_averages,
    e_mask,
    e_of,
    fwht,
    linearize,
    linearized_adjoint,
    modulated_hilbert,
    tile_adjoint,
    tile_operator,
    tree_operator,
    walsh_carleson,
    walsh_coefficients,
    walsh_partial_sum,
)
from tilelab.dyadic import Tile
from tilelab.setmodel import DyadicSet, GridFunction, indicator

POW2 = LacunarySequence.powers(10)
seeds = st.integers(0, 2**32 - 1)


def _random_function(rng, L):
    return GridFunction.from_values(rng.normal(size=1 << L) + 1j * rng.normal(size=1 << L))


class TestSequence:
    def test_powers(self):
        assert POW2.terms[:4] == (2, 4, 8, 16)
        assert POW2.cluster_constant == 20
        # partial sums of powers of two stay below the next term
        assert POW2.c_bar == 1

    def test_truncate(self):
        assert POW2.truncate(20).terms == (2, 4, 8, 16)

    def test_validation(self):
        with pytest.raises(ValueError):
            LacunarySequence((3, 2))
        with pytest.raises(ValueError):
            LacunarySequence((1, 2, 3), c_bar=1)
        with pytest.raises(ValueError):
            LacunarySequence((1, 2), alpha=1)

    def test_cluster_constant_for_slow_growth(self):
        assert LacunarySequence((2, 3, 5), alpha=Fr(3, 2)).cluster_constant == 30


class TestKernel:
    kern = build_kernel(4)

    def test_reconstruction_at_half(self):
        assert self.kern.partial_sum(0.5, 20) == pytest.approx(2.0, abs=1e-15)

    def test_support(self):
        assert self.kern.psi(1.0) == 0
        assert self.kern.psi(8.0) == 0
        assert self.kern.psi(3.0) != 0

    def test_odd(self):
        y = np.random.default_rng(0).uniform(-10, 10, 1000)
        assert np.max(np.abs(self.kern.psi(y) + self.kern.psi(-y))) < 1e-14

    def test_reconstruction_range(self):
        y = np.concatenate([np.geomspace(2**-10, 1, 4000, endpoint=False)])
        y = np.concatenate([y, -y])
        err = np.abs(self.kern.partial_sum(y, 13) - 1 / y) * np.abs(y)
        assert err.max() <= 1e-8

    @pytest.mark.parametrize("w", [0, -1, 5])
    def test_bad_taper(self, w):
        with pytest.raises(ValueError):
            build_kernel(w)

    def test_narrow_taper(self):
        k = build_kernel(Fr(1, 2))
        assert k.partial_sum(0.3, 12) == pytest.approx(1 / 0.3)


class TestHilbert:
    L = 8

    @pytest.mark.parametrize("m,n,factor", [(7, 3, -1j), (3, 3, 0), (-2, 3, 1j)])
    def test_single_mode(self, m, n, factor):
        out = modulated_hilbert(GridFunction.mode(m, self.L), n)
        assert np.allclose(out.values, factor * GridFunction.mode(m, self.L).values)

    def test_out_of_band(self):
        with pytest.raises(ValueError):
            modulated_hilbert(GridFunction.mode(1, 4), 8)

    @pytest.mark.parametrize("n", [0, 5])
    def test_kernel_quadrature_converges(self, n):
        errs = []
        for L in (10, 12, 14):
            N = 1 << L
            x = np.arange(N) / N
            f = GridFunction.from_values(np.cos(2 * np.pi * 3 * x) + np.sin(2 * np.pi * 11 * x) * 1j)
            d = np.arange(1, N)
            kern = np.exp(2j * np.pi * n * d / N) / np.tan(np.pi * d / N) / N
            # circular convolution of f with the kernel, the singular point skipped
            quad = np.array([np.sum(kern * f.values[(t - d) % N]) for t in range(0, N, N // 64)])
            exact = modulated_hilbert(f, n).values[:: N // 64]
            errs.append(np.max(np.abs(quad - exact)))
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 0.01


class TestCarlesonSup:
    def test_single_mode(self):
        out = carleson_sup(GridFunction.mode(5, 8), POW2)
        assert np.allclose(out.values, 1.0)

    def test_zero(self):
        assert np.allclose(carleson_sup(GridFunction.from_values(np.zeros(64)), POW2).values, 0)

    @settings(max_examples=20, deadline=None)
    @given(seeds)
    def test_dominates_every_term(self, seed):
        f = _random_function(np.random.default_rng(seed), 8)
        sup = carleson_sup(f, POW2).values.real
        for n in POW2.truncate(128).terms:
            assert np.all(sup >= np.abs(modulated_hilbert(f, n).values) - 1e-12)


class TestLinearize:
    def test_tie_break(self):
        nfun = linearize(GridFunction.mode(5, 8), POW2)
        assert np.all(nfun.choice == 0)

    def test_zero(self):
        assert np.all(linearize(GridFunction.from_values(np.zeros(64)), POW2).choice == 0)

    @settings(max_examples=20, deadline=None)
    @given(seeds)
    def test_attains_sup(self, seed):
        f = _random_function(np.random.default_rng(seed), 8)
        nfun = linearize(f, POW2)
        sup = carleson_sup(f, POW2).values.real
        got = np.empty(f.size)
        for j, n in enumerate(nfun.terms):
            sel = nfun.choice == j
            got[sel] = np.abs(modulated_hilbert(f, n).values[sel])
        assert np.allclose(got, sup, rtol=1e-12, atol=1e-12)

    def test_choice_validation(self):
        with pytest.raises(ValueError):
            Linearizer(3, np.zeros(4, dtype=int), (2, 4))
        with pytest.raises(ValueError):
            Linearizer(2, np.full(4, 5), (2, 4))


class TestE:
    L = 10

    def test_empty_when_no_term(self):
        nfun = Linearizer.constant(self.L, POW2)
        assert not e_of(Tile.make(4, 3, 0), nfun).cells  # omega = [48, 64) holds no power of two

    def test_full_when_constant_term_inside(self):
        nfun = Linearizer.constant(self.L, POW2, j=5)  # N = 64
        e = e_of(Tile.make(5, 2, 7), nfun)  # omega = [64, 96)
        r = Tile.make(5, 2, 7).interval.descendants(self.L)
        assert e.cells == tuple(range(r.start, r.stop))

    @settings(max_examples=20, deadline=None)
    @given(seeds, st.integers(0, 9))
    def test_row_partition(self, seed, k):
        nfun = Linearizer.random(self.L, POW2, np.random.default_rng(seed))
        total = np.zeros(1 << self.L, dtype=int)
        top = max(POW2.terms) + 1
        for w in range(0, (top >> k) + 1):
            for i in range(1 << k):
                total += e_mask(Tile.make(k, w, i), nfun)
        assert np.all(total == 1)


class TestTileOperator:
    L = 10
    kern = build_kernel(4)

    def test_empty_e(self):
        nfun = Linearizer.constant(self.L, POW2)
        f = _random_function(np.random.default_rng(0), self.L)
        assert np.all(tile_operator(Tile.make(6, 3, 5), f, nfun, self.kern).values == 0)

    @settings(max_examples=15, deadline=None)
    @given(seeds, st.integers(5, 8))
    def test_adjoint_identity_and_supports(self, seed, k):
        rng = np.random.default_rng(seed)
        nfun = Linearizer.random(self.L, POW2, rng)
        j = int(rng.integers(0, 9))
        p = Tile.make(k, POW2.terms[j] >> k, int(rng.integers(0, 1 << k)))
        f, g = _random_function(rng, self.L), _random_function(rng, self.L)
        tf = tile_operator(p, f, nfun, self.kern)
        tg = tile_adjoint(p, g, nfun, self.kern)
        lhs = np.mean(tf.values * np.conj(g.values))
        rhs = np.mean(f.values * np.conj(tg.values))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))
        inside = np.zeros(1 << self.L, dtype=bool)
        r = p.interval.descendants(self.L)
        inside[r.start : r.stop] = True
        assert np.all(tf.values[~inside] == 0)
        assert np.all(tg.values[~adjoint_support_mask(p, self.L)] == 0)

    def test_scale_sum_is_tiling_free(self):
        rng = np.random.default_rng(3)
        nfun = Linearizer.random(self.L, POW2, rng)
        f = _random_function(rng, self.L)
        k = 6
        tiles = [Tile.make(k, w, i) for w in range((max(POW2.terms) >> k) + 1) for i in range(1 << k)]
        total = tree_operator(tiles, f, nfun, self.kern).values
        # the same masked convolution evaluated directly, all x at once
        n = 1 << self.L
        d = np.arange(-(8 << (self.L - k)), (8 << (self.L - k)) + 1)
        x = np.arange(n)
        ys = (x[:, None] - d[None, :]) % n
        kv = self.kern.psi_k(k, d / n)
        phase = np.exp(-2j * np.pi * ((nfun.values[:, None] * ys) % n) / n)
        direct = (phase * kv * f.values[ys]).sum(axis=1) / n
        assert np.allclose(total, direct, atol=1e-12)

    def test_too_coarse(self):
        nfun = Linearizer.constant(self.L, POW2)
        with pytest.raises(ValueError):
            tile_operator(Tile.make(4, 0, 0), GridFunction.mode(0, self.L), nfun, self.kern)


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_linearized_adjoint_identity(seed):
    rng = np.random.default_rng(seed)
    L = 9
    seq = POW2.truncate(1 << (L - 1))
    nfun = Linearizer.random(L, seq, rng)
    f, g = _random_function(rng, L), _random_function(rng, L)
    hf = np.zeros(1 << L, dtype=complex)
    for j, n in enumerate(seq.terms):
        sel = nfun.choice == j
        hf[sel] = modulated_hilbert(f, n).values[sel]
    lhs = np.mean(hf * np.conj(g.values))
    rhs = np.mean(f.values * np.conj(linearized_adjoint(g, nfun).values))
    assert abs(lhs - rhs) < 1e-10


class TestWalsh:
    def test_fwht_matches_matrix(self):
        a = np.random.default_rng(0).normal(size=16)
        t = np.arange(16)
        h = np.array([[(-1) ** bin(n & s).count("1") for s in t] for n in t])
        assert np.allclose(fwht(a), h @ a)

    def test_paley_order(self):
        # w_1 is the first Rademacher function: +1 on [0, 1/2), -1 on [1/2, 1)
        v = np.r_[np.ones(4), -np.ones(4)]
        c = walsh_coefficients(v)
        assert c[1] == pytest.approx(1) and np.allclose(np.delete(c, 1), 0)
        # w_2 is the second Rademacher function
        v2 = np.tile(np.r_[np.ones(2), -np.ones(2)], 2)
        assert walsh_coefficients(v2)[2] == pytest.approx(1)

    def test_quarter_indicator(self):
        f = indicator(DyadicSet(2, (0,)), 6, exact=False)
        out = walsh_partial_sum(f, 1).values.real
        assert np.allclose(out[:32], 0.5) and np.allclose(out[32:], 0)

    def test_full_and_zero(self):
        rng = np.random.default_rng(1)
        f = GridFunction.from_values(rng.normal(size=64))
        assert np.allclose(walsh_partial_sum(f, 63).values, f.values)
        assert np.allclose(walsh_partial_sum(f, 0).values, f.values.real.mean())

    @given(seeds, st.integers(0, 63))
    def test_projection(self, seed, n):
        f = GridFunction.from_values(np.random.default_rng(seed).normal(size=64))
        once = walsh_partial_sum(f, n)
        assert np.allclose(walsh_partial_sum(once, n).values, once.values)

    @given(seeds)
    def test_dyadic_average_oracle(self, seed):
        L = 8
        v = np.random.default_rng(seed).exponential(size=1 << L)
        seq = LacunarySequence.powers(L, shift=-1)  # 1, 3, 7, ...
        out = walsh_carleson(GridFunction.from_values(v), seq).values.real
        oracle = np.max([np.abs(dyadic_averages(v, j)) for j in range(1, L + 1)], axis=0)
        assert np.max(np.abs(out - oracle)) <= 1e-12

    def test_constant(self):
        f = GridFunction.from_values(np.full(32, 2.5))
        assert np.allclose(walsh_carleson(f, LacunarySequence.powers(5, shift=-1)).values, 2.5)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            walsh_partial_sum(GridFunction.from_values(np.ones(8)), 8)
