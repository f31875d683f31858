"""Numerical verification suites.

Every experiment returns an :class:`ExperimentReport`: a list of rows, each
holding a parameter point, the measured ratio and the band it must lie in.
Bands are constants of this implementation (the true constants are not explicit) and are
read from a golden file; ``TILELAB_GOLDEN`` overrides its location.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .carleson import (
    LacunarySequence,
    Linearizer,
    build_kernel,
    carleson_sup,
    dyadic_averages,
    e_mask,
    linearize,
    linearized_adjoint,
    modulated_hilbert,
    tree_adjoint,
    tree_operator,
    walsh_carleson,
)
from .dyadic import CZError, DyadicInterval, Tile, adjoint_support, cz_decompose, dilate
from .setmodel import (
    DyadicSet,
    GridFunction,
    indicator,
    k_F,
    measure,
    random_dyadic_set,
)
from .tfr import ZeroFreqTile, frequencies_of_tile, tfr_global
from .tilealg import (
    TileUniverse,
    TreeFamily,
    classify_tiles,
    decompose_all,
    layer_overlap,
    selected_tops,
    star_foliation,
)

__all__ = [
    "RatioRow",
    "ExperimentReport",
    "GOLDEN_ENV",
    "load_golden",
    "golden_band",
    "lower_bound_experiment",
    "upper_bound_experiment",
    "zygmund_experiment",
    "zygmund_ratio",
    "main_lemma_check",
    "packing_check",
    "foliation_overlap_check",
    "walsh_sharpness_experiment",
    "tree_l2_check",
    "tfr_invariants_check",
    "llogl_norm",
    "walsh_test_function",
    "generate_tree",
    "reports_to_json",
    "reports_to_csv",
]

GOLDEN_ENV = "TILELAB_GOLDEN"
INF = math.inf
# top tiles keep 17 I away from the torus seam when their index is in [9, 2**k - 9)
TILDE_MARGIN = 9


@dataclass(frozen=True)
class RatioRow:
    point: str
    ratio: float
    lo: float
    hi: float

    @property
    def passed(self) -> bool:
        return bool(self.lo <= self.ratio <= self.hi)


@dataclass
class ExperimentReport:
    """Outcome of one experiment. ``passed`` holds iff every row lies in its band."""

    name: str
    params: dict
    rows: list[RatioRow] = field(default_factory=list)
    band: tuple[float, float] = (-INF, INF)
    runtime_ms: int = 0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def ratios(self) -> list[tuple[str, float]]:
        return [(r.point, r.ratio) for r in self.rows]

    def add(self, point: str, ratio: float, lo: float | None = None, hi: float | None = None) -> None:
        lo = self.band[0] if lo is None else lo
        hi = self.band[1] if hi is None else hi
        self.rows.append(RatioRow(point, float(ratio), float(lo), float(hi)))

    def failures(self) -> list[RatioRow]:
        return [r for r in self.rows if not r.passed]

    def summary(self) -> str:
        bad = self.failures()
        state = "PASS" if not bad else f"FAIL ({len(bad)} of {len(self.rows)} rows out of band)"
        return f"{self.name}: {state}"

    def to_dict(self, timings: bool = False) -> dict:
        out = {
            "name": self.name,
            "params": self.params,
            "band": [_json_float(self.band[0]), _json_float(self.band[1])],
            "pass": self.passed,
            "ratios": [
                {
                    "point": r.point,
                    "ratio": _json_float(r.ratio),
                    "band_lo": _json_float(r.lo),
                    "band_hi": _json_float(r.hi),
                    "pass": r.passed,
                }
                for r in self.rows
            ],
        }
        if timings:
            out["runtime_ms"] = self.runtime_ms
        return out


def _json_float(x: float) -> float | str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def reports_to_json(reports: Sequence[ExperimentReport], timings: bool = False) -> str:
    return json.dumps([r.to_dict(timings) for r in reports], indent=1, sort_keys=True) + "\n"


def reports_to_csv(reports: Sequence[ExperimentReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "param_point", "ratio", "band_lo", "band_hi", "pass"])
    for rep in reports:
        for r in rep.rows:
            w.writerow([rep.name, r.point, repr(r.ratio), repr(r.lo), repr(r.hi), int(r.passed)])
    return buf.getvalue()


def _timed(fn: Callable[..., ExperimentReport]) -> Callable[..., ExperimentReport]:
    def wrapper(*args, **kwargs) -> ExperimentReport:
        t0 = time.perf_counter()
        rep = fn(*args, **kwargs)
        rep.runtime_ms = int(round(1000 * (time.perf_counter() - t0)))
        return rep

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    wrapper.__wrapped__ = fn
    return wrapper


# --------------------------------------------------------------------------- golden bands


def load_golden(path: str | Path | None = None) -> dict:
    """Read the golden band file (``TILELAB_GOLDEN`` or the packaged default)."""
    if path is None:
        path = os.environ.get(GOLDEN_ENV)
    if path is None:
        text = resources.files("tilelab").joinpath("golden.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text)
    if "bands" not in data:
        raise ValueError("golden file has no 'bands' section")
    return data


def golden_band(name: str, golden: dict | None = None) -> tuple[float, float]:
    golden = load_golden() if golden is None else golden
    try:
        entry = golden["bands"][name]
    except KeyError:
        raise KeyError(f"golden file has no band named {name!r}") from None
    lo = -INF if entry.get("lo") is None else float(entry["lo"])
    hi = INF if entry.get("hi") is None else float(entry["hi"])
    return lo, hi


def _trial_rngs(seed: int, trials: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trials)]


def _denominator(mu: float) -> float:
    """``|F| log2(4 / |F|)``."""
    return mu * math.log2(4.0 / mu)


# --------------------------------------------------------------------------- lacunary Carleson bounds


def _lower_interval(big_n: int) -> DyadicSet:
    """``[1/2 - 2**-N, 1/2)`` as a dyadic set."""
    return DyadicSet(big_n, ((1 << (big_n - 1)) - 1,))


@_timed
def lower_bound_experiment(
    eta_exps: Iterable[int] = range(4, 11),
    grid_level: int = 16,
    seq: LacunarySequence | None = None,
    golden: dict | None = None,
    max_spread: float = 4.0,
) -> ExperimentReport:
    """``r(N) = ||C_lac chi_F||_1 / (|F| log2(4/|F|))`` for ``F = [1/2 - 2**-N, 1/2]``.

    Also records the same ratio for the plain conjugate function (``N(x) = 0``)
    and the spread ``max r / min r``.
    """
    eta_exps = list(eta_exps)
    L = grid_level
    if max(eta_exps) > L - 4:
        raise ValueError(f"grid 2^{L} too small for N = {max(eta_exps)}; need N <= L - 4")
    seq = LacunarySequence.powers(L - 2) if seq is None else seq
    lo, hi = golden_band("lower_bound", golden)
    rep = ExperimentReport(
        "carleson_lower",
        {"grid_level": L, "eta_exps": eta_exps, "seq": "n_j = 2^j" if seq.terms[0] == 2 else list(seq.terms)},
        band=(lo, hi),
    )
    values = []
    for big_n in eta_exps:
        chi = indicator(_lower_interval(big_n), L)
        denom = _denominator(2.0**-big_n)
        r = np.mean(carleson_sup(chi, seq).values.real) / denom
        r0 = np.mean(np.abs(modulated_hilbert(chi, 0).values)) / denom
        values.append(r)
        rep.add(f"N={big_n}", r)
        rep.add(f"N={big_n},conjugate", r0)
    rep.add("spread max/min", max(values) / min(values), 1.0, max_spread)
    return rep


@_timed
def upper_bound_experiment(
    trials: int = 200,
    grid_level: int = 14,
    seed: int = 0,
    modes: Sequence[str] = ("random", "dual", "adversarial"),
    golden: dict | None = None,
    set_level: int | None = None,
) -> ExperimentReport:
    """``||chi_F C*(g)||_1 / (|F| log2(4/|F|))`` over random sets, functions and linearizers.

    ``|F|`` sweeps ``2**-2 .. 2**-10`` evenly in the exponent across trials.
    Modes: ``random`` (random ``N`` and unimodular ``g``), ``dual`` (``N``
    linearizes ``chi_F`` and ``g`` is the phase of ``H_N chi_F``, which
    attains the dual pairing) and ``adversarial`` (three rounds of alternating
    maximization over ``N`` and ``g`` from a random start).
    """
    L = grid_level
    seq = LacunarySequence.powers(L - 2)
    lo, hi = golden_band("upper_bound", golden)
    set_level = min(L, 12) if set_level is None else set_level
    rep = ExperimentReport(
        "carleson_upper",
        {"grid_level": L, "trials": trials, "seed": seed, "modes": list(modes)},
        band=(lo, hi),
    )
    for t, rng in enumerate(_trial_rngs(seed, trials)):
        expo = 2.0 + 8.0 * (t / max(trials - 1, 1))
        f = random_dyadic_set(rng, set_level, 2.0**-expo)
        mu = float(measure(f))
        chi = f.mask(L).astype(np.float64)
        mode = modes[t % len(modes)]
        nfun, g = _upper_trial(mode, chi, seq, L, rng)
        out = linearized_adjoint(g, nfun)
        ratio = np.mean(np.abs(out.values) * chi) / _denominator(mu)
        rep.add(f"trial={t},mode={mode},log2|F|={math.log2(mu):.3f}", ratio)
    return rep


def _unimodular(z: np.ndarray) -> np.ndarray:
    mod = np.abs(z)
    return np.where(mod > 1e-300, z / np.where(mod > 1e-300, mod, 1.0), 1.0)


def _upper_trial(
    mode: str, chi: np.ndarray, seq: LacunarySequence, L: int, rng: np.random.Generator
) -> tuple[Linearizer, GridFunction]:
    n = 1 << L
    if mode == "random":
        nfun = Linearizer.random(L, seq.truncate(n // 2), rng)
        g = GridFunction.from_values(np.exp(2j * np.pi * rng.random(n)))
        return nfun, g
    if mode == "dual":
        h = GridFunction.from_values(chi)
        rounds = 1
    elif mode == "adversarial":
        h = GridFunction.from_values(chi * np.exp(2j * np.pi * rng.random(n)))
        rounds = 3
    else:
        raise ValueError(f"unknown mode {mode!r}")
    for r in range(rounds):
        nfun = linearize(h, seq)
        terms = np.asarray(nfun.terms)
        m = h.frequencies
        # H_N h at every point, from the selected multiplier
        hn = np.empty(n, dtype=np.complex128)
        for j, freq in enumerate(terms):
            sel = nfun.choice == j
            if sel.any():
                hj = np.fft.ifft(np.fft.ifftshift(h.coeffs * (-1j * np.sign(m - freq)))) * n
                hn[sel] = hj[sel]
        g = GridFunction.from_values(np.conj(_unimodular(hn)))
        if r + 1 < rounds:
            back = linearized_adjoint(g, nfun)
            h = GridFunction.from_values(chi * np.conj(_unimodular(back.values)))
    return nfun, g


# --------------------------------------------------------------------------- Zygmund

MAX_ZYGMUND_TERMS = 96
_TAIL_BITS = 60


def _digit_pattern(kind: str, big_n: int, s: int, length: int) -> np.ndarray:
    """Per binary digit of ``x``: ``-1`` free, ``0`` / ``1`` forced, for ``x`` uniform on ``F``."""
    pat = np.full(length, -1, dtype=np.int8)
    if kind == "interval":
        pat[:big_n] = 0
    elif kind == "cantor":
        for stage in range(big_n):
            pos = (stage + 1) * s + stage
            pat[pos] = 1
    else:
        raise ValueError(f"unknown set kind {kind!r}")
    return pat


def _exact_means(pat: np.ndarray, m_terms: int) -> np.ndarray:
    """``mean over F of exp(2 pi i 2**j x)`` for ``j = 1..M``, in closed form."""
    out = np.empty(m_terms, dtype=np.complex128)
    for j in range(1, m_terms + 1):
        prod = 1.0 + 0j
        for i in range(1, _TAIL_BITS + 1):
            d = pat[j + i - 1]
            w = np.exp(2j * np.pi * 2.0**-i)
            prod *= (1 + w) / 2 if d < 0 else (w if d == 1 else 1.0)
        out[j - 1] = prod
    return out


def zygmund_ratio(
    kind: str,
    big_n: int,
    s: int,
    samples: int = 40000,
    seed: int = 0,
    m_terms: int | None = None,
) -> float:
    """``int_F |sum_j a_j e(2**j x)| dx / (|F| min(sqrt N, sqrt M) sqrt M)``.

    ``x`` is drawn uniformly from ``F`` through its binary digits (exact in
    distribution; the Cantor set is never enumerated). ``a_j`` is the phase
    aligning term ``j`` with its mean over ``F``.
    """
    m_terms = (1 << s) * big_n if m_terms is None else m_terms
    if m_terms > MAX_ZYGMUND_TERMS:
        raise ValueError(f"M = {m_terms} exceeds the supported band of {MAX_ZYGMUND_TERMS} terms")
    length = m_terms + _TAIL_BITS + 1
    pat = _digit_pattern(kind, big_n, s, length)
    rng = np.random.default_rng([seed, big_n, s, m_terms, 0 if kind == "interval" else 1])
    bits = rng.integers(0, 2, size=(samples, length), dtype=np.int8)
    forced = pat >= 0
    bits[:, forced] = pat[forced]
    weights = 2.0 ** -np.arange(1, 54)
    means = _exact_means(pat, m_terms)
    a = np.where(np.abs(means) > 1e-12, np.conj(_unimodular(means)), 1.0)
    acc = np.zeros(samples, dtype=np.complex128)
    bf = bits.astype(np.float64)
    for j in range(1, m_terms + 1):
        frac = bf[:, j : j + 53] @ weights
        acc += a[j - 1] * np.exp(2j * np.pi * frac)
    avg = float(np.mean(np.abs(acc)))
    return avg / (math.sqrt(min(big_n, m_terms)) * math.sqrt(m_terms))


@_timed
def zygmund_experiment(
    big_n: Iterable[int] = range(3, 7),
    s_range: Iterable[int] = range(1, 4),
    kinds: Sequence[str] = ("interval", "cantor"),
    samples: int = 40000,
    seed: int = 0,
    golden: dict | None = None,
) -> ExperimentReport:
    """Upper band for both set kinds, lower band for Cantor sets, ``O(1)`` band for intervals at ``M = N``."""
    big_n, s_range = list(big_n), list(s_range)
    up = golden_band("zygmund_upper", golden)
    cantor_lo = golden_band("zygmund_cantor_lower", golden)
    interval_band = golden_band("zygmund_interval", golden)
    rep = ExperimentReport(
        "zygmund",
        {"N": big_n, "s": s_range, "kinds": list(kinds), "samples": samples, "seed": seed},
        band=up,
    )
    for kind in kinds:
        for n in big_n:
            if kind == "interval":
                r = zygmund_ratio(kind, n, 0, samples, seed, m_terms=n)
                rep.add(f"kind=interval,N={n},M=N", r, *interval_band)
            for s in s_range:
                r = zygmund_ratio(kind, n, s, samples, seed)
                rep.add(f"kind={kind},N={n},s={s}", r, up[0], up[1])
                if kind == "cantor":
                    rep.add(f"kind=cantor,N={n},s={s},lower", r, cantor_lo[0], INF)
    return rep


# --------------------------------------------------------------------------- trees


@dataclass
class GeneratedTree:
    top: Tile
    tiles: list[Tile]
    nfun: Linearizer
    density: Fraction


def generate_tree(
    rng: np.random.Generator,
    grid_level: int,
    n: int,
    top_scale: int = 5,
    max_depth: int = 3,
    keep: float = 0.7,
    exact_density: bool = True,
) -> GeneratedTree:
    """Random convex tree with ``|E(P)| / |I_P| <= 2**-n`` on every tile.

    The tree is a random rooted subtree of the dyadic tree below a top tile
    placed away from the torus seam. ``N`` equals a frequency inside every
    tile's ``omega`` on a set that has density exactly ``2**-n`` in each finest
    interval (at most ``2**-n`` when ``exact_density`` is false) and a
    frequency outside every ``omega`` elsewhere.
    """
    L = grid_level
    depth_cap = min(max_depth, L - n - top_scale)
    if depth_cap < 0:
        raise ValueError("grid too coarse for the requested mass")
    depth = int(rng.integers(0, depth_cap + 1))
    span = 1 << top_scale
    top_index = int(rng.integers(TILDE_MARGIN, span - TILDE_MARGIN))
    top_omega = int(rng.integers(16, 64))
    top = Tile.make(top_scale, top_omega, top_index)
    tiles = [top]
    frontier = [top.interval]
    for level in range(top_scale + 1, top_scale + depth + 1):
        nxt = []
        for iv in frontier:
            for ch in iv.children():
                if rng.random() < keep:
                    nxt.append(ch)
        omega_idx = top_omega >> (level - top_scale)
        tiles += [Tile.make(level, omega_idx, ch.index) for ch in nxt]
        frontier = nxt
        if not frontier:
            break
    finest = top_scale + depth
    inside = top.omega.lo + int(rng.integers(0, top.omega.length))
    widest = max((t.omega for t in tiles), key=lambda w: w.length)
    outside = widest.hi + int(rng.integers(0, 64))
    choice = np.ones(1 << L, dtype=np.int64)
    cells = 1 << (L - finest)
    per = cells >> n
    for iv in top.interval.descendants(finest):
        hits = per if exact_density else int(rng.integers(0, per + 1))
        pick = rng.choice(cells, size=hits, replace=False)
        choice[iv * cells + pick] = 0
    nfun = Linearizer(L, choice, (inside, outside))
    return GeneratedTree(top, tiles, nfun, Fraction(1, 1 << n))


def _min_adjoint_cells(tiles: Sequence[Tile]) -> list[DyadicInterval]:
    """Minimal (under inclusion) cells among the adjoint supports of the tiles."""
    cells = set()
    for p in tiles:
        cells.update(adjoint_support(p)[0])
    return [c for c in cells if not any(o != c and c.contains(o) for o in cells)]


@_timed
def main_lemma_check(
    trials: int = 200,
    seed: int = 0,
    grid_level: int = 12,
    golden: dict | None = None,
    taper: float = 4.0,
    audit: list | None = None,
) -> ExperimentReport:
    """``sum_I 2**-k(I) int_I |T^p* g|^2`` against ``2**-k 2**-2n |I_p| ||g||_inf^2``.

    Instances whose adjoint cells admit no Calderon-Zygmund decomposition of
    ``I_p = 17 I_top`` are regenerated. When ``audit`` is a list, every
    decomposition attempt is appended to it as ``(cells, base, outcome)``
    where ``outcome`` is the decomposition or the raised ``CZError``.
    """
    L = grid_level
    kern = build_kernel(taper)
    lo, hi = golden_band("main_lemma", golden)
    rep = ExperimentReport(
        "main_lemma", {"trials": trials, "seed": seed, "grid_level": L}, band=(lo, hi)
    )
    retries = 0
    for t, rng in enumerate(_trial_rngs(seed, trials)):
        while True:
            n = int(rng.integers(0, 4))
            k = int(rng.integers(1, 6))
            tree = generate_tree(rng, L, n, max_depth=3)
            base = dilate(tree.top.interval, 17)
            minimal = _min_adjoint_cells(tree.tiles)
            try:
                cz = cz_decompose(minimal, base)
            except CZError as exc:
                if audit is not None:
                    audit.append((minimal, base, exc))
                retries += 1
                continue
            if audit is not None:
                audit.append((minimal, base, cz))
            break
        family = _carleson_family(rng, cz, k, L)
        g = GridFunction.from_values(np.exp(2j * np.pi * rng.random(1 << L)))
        out = np.abs(tree_adjoint(tree.tiles, g, tree.nfun, kern).values) ** 2
        lhs = 0.0
        for iv, kk in family:
            r = iv.descendants(L)
            lhs += 2.0**-kk * out[r.start : r.stop].sum() / (1 << L)
        rhs = 2.0**-k * 2.0 ** (-2 * n) * float(base.length)
        rep.add(f"trial={t},n={n},k={k},tiles={len(tree.tiles)}", lhs / rhs)
    rep.params["regenerated"] = retries
    return rep


def _carleson_family(
    rng: np.random.Generator, cz: Sequence[DyadicInterval], k: int, L: int
) -> list[tuple[DyadicInterval, int]]:
    """Disjoint intervals nested in the CZ pieces with weights ``2**-k(I)``, ``k(I) >= k``.

    Within each piece ``J`` the chosen intervals are disjoint, so
    ``sum_{I in J} 2**-k(I) |I| <= 2**-k |J|``.
    """
    out = []
    for j in cz:
        if rng.random() < 0.2:
            continue
        depth = int(rng.integers(0, max(1, min(3, L - j.level)) + 1))
        depth = min(depth, L - j.level)
        for idx in j.descendants(j.level + depth):
            if rng.random() < 0.8:
                out.append((DyadicInterval(j.level + depth, idx), k + int(rng.integers(0, 3))))
    return out


@_timed
def tree_l2_check(
    n_range: Iterable[int] = range(0, 7),
    trials: int = 50,
    seed: int = 0,
    grid_level: int = 12,
    golden: dict | None = None,
    taper: float = 4.0,
) -> ExperimentReport:
    """``||T^p f||_2 / (2**(-n/2) ||f||_2)`` over generated trees of uniform mass ``2**-n``."""
    L = grid_level
    kern = build_kernel(taper)
    lo, hi = golden_band("tree_l2", golden)
    n_range = list(n_range)
    rep = ExperimentReport(
        "tree_l2", {"n": n_range, "trials": trials, "seed": seed, "grid_level": L}, band=(lo, hi)
    )
    for n in n_range:
        for t, rng in enumerate(_trial_rngs(seed + 1000 * n, trials)):
            tree = generate_tree(rng, L, n, max_depth=3)
            f = rng.normal(size=1 << L) + 1j * rng.normal(size=1 << L)
            f /= np.sqrt(np.mean(np.abs(f) ** 2))
            out = tree_operator(tree.tiles, GridFunction.from_values(f), tree.nfun, kern)
            ratio = out.l2() / 2.0 ** (-n / 2)
            rep.add(f"n={n},trial={t},tiles={len(tree.tiles)}", ratio)
    return rep


# --------------------------------------------------------------------------- packing


@_timed
def packing_check(trials: int = 10000, seed: int = 0, grid_level: int = 12) -> ExperimentReport:
    """Random antichains inside a dyadic ``I``: ``E(P)`` disjoint and ``sum |E(P)| <= |I|``."""
    L = grid_level
    seq = LacunarySequence.powers(L - 2)
    rep = ExperimentReport("packing", {"trials": trials, "seed": seed, "grid_level": L}, band=(0.0, 1.0))
    worst = 0.0
    overlaps = 0
    comparable = 0
    rngs = _trial_rngs(seed, 1)[0]
    nfun_bank = [Linearizer.random(L, seq, rngs) for _ in range(8)]
    nfun_bank.append(Linearizer.constant(L, seq, 3))
    for t, rng in enumerate(_trial_rngs(seed + 1, trials)):
        nfun = nfun_bank[t % len(nfun_bank)]
        tiles = random_antichain(rng, L, nfun)
        comparable += sum(
            1 for a in range(len(tiles)) for b in range(len(tiles)) if a != b and _leq(tiles[a], tiles[b])
        )
        top = tiles[0][1]
        count = np.zeros(1 << L, dtype=np.int64)
        for p, _ in tiles:
            count += e_mask(p, nfun)
        overlaps += int((count > 1).sum())
        r = top.descendants(L)
        worst = max(worst, count[r.start : r.stop].sum() / (r.stop - r.start))
    rep.add("max sum|E(P)|/|I|", worst, 0.0, 1.0)
    rep.add("overlapping E(P) cells", overlaps, 0, 0)
    rep.add("comparable pairs generated", comparable, 0, 0)
    return rep


def _leq(a: tuple[Tile, DyadicInterval], b: tuple[Tile, DyadicInterval]) -> bool:
    p, q = a[0], b[0]
    return q.interval.contains(p.interval) and p.omega.contains(q.omega)


def random_antichain(
    rng: np.random.Generator, grid_level: int, nfun: Linearizer, size: int = 12
) -> list[tuple[Tile, DyadicInterval]]:
    """Pairwise incomparable tiles inside a random dyadic ``I`` (returned alongside each tile).

    Candidates are aimed at the graph of ``N``: a random point ``x`` in ``I``
    and a scale ``k`` give the tile at ``(N(x), x)``. Candidates comparable to
    an accepted tile are rejected.
    """
    L = grid_level
    top_level = int(rng.integers(0, L - 3))
    top = DyadicInterval(top_level, int(rng.integers(0, 1 << top_level)))
    r = top.descendants(L)
    accepted: list[Tile] = []
    vals = nfun.values
    for _ in range(4 * size):
        if len(accepted) >= size:
            break
        x = int(rng.integers(r.start, r.stop))
        k = int(rng.integers(top_level, L + 1))
        freq = int(vals[x]) if rng.random() < 0.8 else int(rng.integers(0, 1 << (L - 1)))
        cand = Tile.make(k, freq >> k, x >> (L - k))
        if any(_leq((cand, top), (p, top)) or _leq((p, top), (cand, top)) for p in accepted):
            continue
        accepted.append(cand)
    return [(p, top) for p in accepted]


# --------------------------------------------------------------------------- foliation


def _nested_triple_trees(rng: np.random.Generator, gap: int = 10) -> list[TreeFamily]:
    """Three tops of strictly decreasing size whose ``I~`` share a point, plus decoys."""
    k1 = 5
    scales = (k1, k1 + gap, k1 + 2 * gap)
    top_level = scales[-1]
    x = int(rng.integers(0, 1 << top_level))
    trees = []
    for k in scales:
        # put x anywhere inside I~ of the chosen top, including near its edges
        offset = int(rng.integers(-8, 9))
        idx = ((x >> (top_level - k)) + offset) % (1 << k)
        p = Tile.make(k, 20, idx)
        trees.append(TreeFamily(p, [p], l=0, n=0, m=1))
    for _ in range(int(rng.integers(0, 6))):
        k = int(rng.choice(scales))
        p = Tile.make(k, 20, int(rng.integers(0, 1 << k)))
        if all(t.top != p for t in trees):
            trees.append(TreeFamily(p, [p], l=0, n=0, m=1))
    return trees


def _has_nested_triple(tops: Sequence[Tile]) -> bool:
    """Three tops of pairwise different sizes whose ``I~`` have a common point."""
    scales = sorted({t.scale for t in tops})
    if len(scales) < 3:
        return False
    level = scales[-1]
    pieces = {}
    for t in tops:
        d = level - t.scale
        start = ((t.interval.index - 8) << d) % (1 << level)
        pieces[t] = (start, 17 << d)
    points = []
    for t, (a, ln) in pieces.items():
        points += [a, a + ln - 1]
    for xpt in points:
        xpt %= 1 << level
        sizes = set()
        for t, (a, ln) in pieces.items():
            if (xpt - a) % (1 << level) < ln:
                sizes.add(t.scale)
        if len(sizes) >= 3:
            return True
    return False


@_timed
def foliation_overlap_check(
    trials: int = 1000,
    seed: int = 0,
    grid_level: int = 12,
    adversarial: int | None = None,
    bound: int = 100,
) -> ExperimentReport:
    """Layer-one overlap ``sum chi_{I~_P}`` over random universes, plus adversarial nested triples."""
    L = grid_level
    adversarial = max(1, trials // 10) if adversarial is None else adversarial
    seq = LacunarySequence.powers(L - 2)
    rep = ExperimentReport(
        "foliation",
        {"trials": trials, "adversarial": adversarial, "seed": seed, "grid_level": L},
        band=(0, bound),
    )
    worst = 0
    layers_excess = 0
    classes_seen = 0
    for rng in _trial_rngs(seed, trials):
        f = random_dyadic_set(rng, L - 2)
        nfun = Linearizer.random(L, seq, rng)
        u = TileUniverse.build(f, nfun, seq)
        kf = k_F(f)
        for trees in decompose_all(u, classify_tiles(u)).values():
            classes_seen += 1
            layers = star_foliation(trees)
            layers_excess += max(layers) > kf + 1
            worst = max(worst, layer_overlap(selected_tops(trees)))
    admitted = 0
    worst_adv = 0
    for rng in _trial_rngs(seed + 7, adversarial):
        trees = _nested_triple_trees(rng)
        star_foliation(trees)
        tops = selected_tops(trees)
        admitted += _has_nested_triple(tops)
        worst_adv = max(worst_adv, layer_overlap(tops))
    rep.params["classes"] = classes_seen
    rep.add("max layer-1 overlap (random universes)", worst, 0, bound)
    rep.add("max layer-1 overlap (adversarial)", worst_adv, 0, bound)
    rep.add("nested triples admitted to layer 1", admitted, 0, 0)
    rep.add("classes needing more than k_F + 1 layers", layers_excess, 0, 0)
    return rep


# --------------------------------------------------------------------------- Walsh


def walsh_test_function(n: int, grid_level: int) -> np.ndarray:
    """Exact cell averages of ``min(2**n, 1/x)`` on the ``2**grid_level`` grid."""
    L = grid_level
    if n > L:
        raise ValueError("cap 2^n must be resolved by the grid")
    h = 2.0**-L
    t = np.arange(1 << L)
    a, b = t * h, (t + 1) * h
    cut = 2.0**-n
    flat = b <= cut
    out = np.empty(1 << L)
    out[flat] = 2.0**n
    out[~flat] = np.log(b[~flat] / a[~flat]) / h
    return out


def llogl_norm(values: np.ndarray) -> float:
    """``sum_l 2**l |F_l| log2(4 / |F_l|)`` over the dyadic value layers of ``|f|``.

    ``F_l = {2**l <= |f| < 2**(l+1)}``; cells with ``|f| < 1`` form the bottom
    layer ``l = 0`` as well (the norm dominates ``||f||_1`` there).
    """
    v = np.abs(np.asarray(values, dtype=np.float64))
    n = v.size
    layer = np.floor(np.log2(np.maximum(v, 1.0))).astype(np.int64)
    total = 0.0
    for lv in np.unique(layer[v > 0]):
        mu = np.count_nonzero((layer == lv) & (v > 0)) / n
        total += 2.0**lv * mu * math.log2(4.0 / mu)
    return total


def _loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


@_timed
def walsh_sharpness_experiment(
    n_range: Iterable[int] = range(4, 11),
    grid_level: int = 16,
    golden: dict | None = None,
    exponent: float = 2.0,
    exponent_tol: float = 0.2,
) -> ExperimentReport:
    """Growth of ``||C_W f_n||_1`` and ``||f_n||_{L log L}`` for ``n_j = 2**j - 1``."""
    L = grid_level
    n_range = list(n_range)
    seq = LacunarySequence(tuple((1 << j) - 1 for j in range(1, L + 1)), Fraction(2))
    band = golden_band("walsh_ratio", golden)
    rep = ExperimentReport("walsh", {"n": n_range, "grid_level": L}, band=band)
    norms, llogl, oracle_err = [], [], 0.0
    for n in n_range:
        f = walsh_test_function(n, L)
        cw = walsh_carleson(GridFunction.from_values(f), seq).values.real
        oracle = np.max([np.abs(dyadic_averages(f, j)) for j in range(1, L + 1)], axis=0)
        oracle_err = max(oracle_err, float(np.max(np.abs(cw - oracle))))
        norms.append(float(np.mean(cw)))
        llogl.append(llogl_norm(f))
        rep.add(f"n={n},ratio", norms[-1] / llogl[-1])
    lo_e, hi_e = exponent - exponent_tol, exponent + exponent_tol
    rep.add("exponent ||C_W f_n||_1", _loglog_slope(n_range, norms), lo_e, hi_e)
    rep.add("exponent ||f_n||_LlogL", _loglog_slope(n_range, llogl), lo_e, hi_e)
    rep.add("dyadic-average oracle max error", oracle_err, 0.0, 1e-12)
    quad = np.polyfit(n_range, norms, 2)
    rep.params["quadratic_fit_l1"] = [float(c) for c in quad]
    rep.params["l1_norms"] = norms
    rep.params["llogl_norms"] = llogl
    return rep


# --------------------------------------------------------------------------- TFR invariants


def _tfr_violations(f: DyadicSet, freqs: Sequence[int]) -> dict[str, int]:
    viol = {"geometric_decay": 0, "uniform_length": 0, "freq_containment": 0,
            "saturation_split": 0, "representative": 0, "spatial_word": 0}
    forests = tfr_global(f)
    for fr in forests[1:]:
        for top, tree in fr.roots.items():
            nodes = list(tree.walk()) if tree is not None else []
            sizes = {nd.word: sum(iv.length for iv in nd.c_set) for nd in nodes}
            fsets = {}
            for nd in nodes:
                if not nd.c_set:
                    continue
                if len({iv.level for iv in nd.c_set}) > 1:
                    viol["uniform_length"] += 1
                reps = {tuple(frequencies_of_tile(freqs, ZeroFreqTile(iv), fr)) for iv in nd.c_set}
                viol["representative"] += len(reps) > 1
                fsets[nd.word] = set(next(iter(reps)))
                viol["saturation_split"] += _split_violations(nd)
            for nd in nodes:
                for other in nodes:
                    w, w2 = nd.word, other.word
                    if len(w2) >= len(w) + 2 and w2.startswith(w) and sizes[w2] > sizes[w] / 2:
                        viol["geometric_decay"] += 1
                    if (
                        len(w2) > len(w)
                        and w2.startswith(w + "L")
                        and w in fsets
                        and w2 in fsets
                        and not fsets[w2] <= fsets[w]
                    ):
                        viol["freq_containment"] += 1
            viol["spatial_word"] += _spatial_violations(nodes)
    return viol


def _split_violations(nd) -> int:
    """Saturation rule at one node: the threshold is the smallest size holding half the mass."""
    a = nd.inputs
    total = sum(iv.length for iv in a)
    thr = Fraction(1, nd.alpha)
    below = sum(iv.length for iv in a if iv.length < thr)
    upto = sum(iv.length for iv in a if iv.length <= thr)
    bad = 0
    bad += not (2 * below < total <= 2 * upto)
    bad += any(iv.length == thr for iv in a) is False
    up = nd.child_u.inputs if nd.child_u else ()
    low = nd.child_l.inputs if nd.child_l else ()
    bad += set(up) != {iv for iv in a if iv.length < thr}
    bad += set(low) != {iv for iv in a if iv.length > thr}
    bad += any(not any(b.contains(iv) for b in nd.c_set) for iv in a if iv.length <= thr)
    return int(bad)


def _spatial_violations(nodes) -> int:
    """Intersecting tiles in nodes ``w`` and ``w'`` (``|w| < |w'|``) need ``w' = w U ...``."""
    bad = 0
    for nd in nodes:
        for other in nodes:
            w, w2 = nd.word, other.word
            if len(w2) <= len(w):
                continue
            if any(a.intersects(b) for a in nd.c_set for b in other.c_set):
                bad += not w2.startswith(w + "U")
    return bad


@_timed
def tfr_invariants_check(trials: int = 100, level: int = 12, seed: int = 0) -> ExperimentReport:
    """Structural properties of the regularization on seeded random sets; all counts must be zero."""
    rep = ExperimentReport("tfr_invariants", {"trials": trials, "level": level, "seed": seed}, band=(0, 0))
    totals: dict[str, int] = {}
    for rng in _trial_rngs(seed, trials):
        f = random_dyadic_set(rng, level)
        freqs = sorted({1 << j for j in range(level + 2)} | set(rng.integers(1, 1 << level, 8).tolist()))
        for key, v in _tfr_violations(f, freqs).items():
            totals[key] = totals.get(key, 0) + v
    for key in sorted(totals):
        rep.add(key, totals[key], 0, 0)
    return rep
