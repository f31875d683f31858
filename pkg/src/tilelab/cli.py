"""Command-line driver: ``tilelab <command> [options]``.

Every command writes a machine-readable report (JSON by default, CSV with
``--format csv``) to ``--out`` or to stdout. The exit status is 0 when every
check in the report passes, 1 when one fails and 2 on a usage error. For a
fixed argument list the output is byte-identical from run to run; timings are
never written.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import verify
from .carleson import LacunarySequence, Linearizer
from .setmodel import DyadicSet, random_dyadic_set
from .tfr import dump_forests, tfr_global
from .tilealg import TileUniverse, classify_tiles, decompose_all, star_foliation, tile_record

MIN_GRID, MAX_GRID = 8, 22


class UsageError(Exception):
    """Bad arguments that argparse itself cannot detect."""


@dataclass(frozen=True)
class Config:
    grid_level: int = 14
    alpha: Fraction = Fraction(2)
    seq_length: int | None = None
    seed: int = 0
    output_format: str = "json"

    def __post_init__(self) -> None:
        if not MIN_GRID <= self.grid_level <= MAX_GRID:
            raise UsageError(f"--grid must lie in [{MIN_GRID}, {MAX_GRID}], got {self.grid_level}")
        if self.alpha <= 1:
            raise UsageError("--alpha must exceed 1")
        if self.output_format not in ("json", "csv"):
            raise UsageError(f"unknown format {self.output_format!r}")

    def sequence(self) -> LacunarySequence:
        """``n_j = ceil(alpha**j)``, bumped to stay strictly increasing, below the grid band."""
        band = 1 << (self.grid_level - 1)
        count = self.seq_length
        terms: list[int] = []
        j = 1
        while count is None or len(terms) < count:
            t = math.ceil(self.alpha**j)
            if terms:
                t = max(t, terms[-1] + 1)
            if t >= band:
                break
            terms.append(t)
            j += 1
        if not terms:
            raise UsageError("the sequence has no term inside the frequency band")
        if count is not None and len(terms) < count:
            raise UsageError(f"only {len(terms)} terms fit below the band {band}")
        return LacunarySequence(tuple(terms), self.alpha)


def _int_range(text: str) -> list[int]:
    """``"4..10"`` or ``"5"`` or ``"3,5,7"``."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N, N..M or N,M,...: {text!r}") from None


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs) -> None:
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)


def _common(p: argparse.ArgumentParser, grid: int | None = None, trials: int | None = None) -> None:
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json", dest="output_format")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=_positive, default=1, help="parallelism cap; results do not depend on it")
    p.add_argument("--golden", help="golden band file (overrides TILELAB_GOLDEN)")
    if grid is not None:
        p.add_argument("--grid", type=int, default=grid, dest="grid_level", help="grid level L, 2**L points")
    if trials is not None:
        p.add_argument("--trials", type=_positive, default=trials)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="tilelab", description="Tile machinery and lacunary Carleson experiments.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("tfr", help="dump the time-frequency regularization of a set")
    p.add_argument("--set", required=True, dest="set_path", help='JSON file {"level": L, "cells": [...]}')
    p.add_argument("--k", type=int, help="only the forest of this level (default: all)")
    p.add_argument("--out", help="output file (default: stdout)")

    car = sub.add_parser("carleson", help="bounds for the lacunary Carleson operator")
    csub = car.add_subparsers(dest="which", required=True, parser_class=_Parser)
    p = csub.add_parser("lower", help="indicator-of-interval sweep")
    _common(p, grid=16)
    p.add_argument("--N", type=_int_range, default=list(range(4, 11)), dest="big_n")
    p.add_argument("--alpha", type=_fraction, default=Fraction(2))
    p.add_argument("--seq-length", type=_positive, dest="seq_length")
    p = csub.add_parser("upper", help="restricted weak-type sweep over random sets")
    _common(p, grid=14, trials=200)

    p = sub.add_parser("zygmund", help="Zygmund two-sided bounds for interval and Cantor sets")
    _common(p)
    p.add_argument("--N", type=_int_range, default=list(range(3, 7)), dest="big_n")
    p.add_argument("--s", type=_int_range, default=list(range(1, 4)), dest="s_range")
    p.add_argument("--samples", type=_positive, default=40000)

    p = sub.add_parser("walsh", help="Walsh-Carleson growth against L log L")
    _common(p, grid=16)
    p.add_argument("--n", type=_int_range, default=list(range(4, 11)), dest="n_range")

    chk = sub.add_parser("check", help="combinatorial and operator checks")
    ksub = chk.add_subparsers(dest="which", required=True, parser_class=_Parser)
    _common(ksub.add_parser("packing", help="Carleson packing of antichains"), grid=12, trials=10000)
    _common(ksub.add_parser("foliation", help="layer-one overlap of tree foliations"), grid=12, trials=1000)
    _common(ksub.add_parser("main-lemma", help="main lemma ratio on generated trees"), grid=12, trials=200)
    _common(ksub.add_parser("tree-l2", help="L2 decay of tree operators in the mass"), grid=12, trials=50)
    _common(ksub.add_parser("tfr-invariants", help="regularization invariants on random sets"), grid=12, trials=100)

    til = sub.add_parser("tiles", help="tile universe of a set and a random linearizer")
    tsub = til.add_subparsers(dest="which", required=True, parser_class=_Parser)
    for name, hlp in (("classify", "cluster/separated/zero counts per scale"), ("foliate", "tree families with layers")):
        p = tsub.add_parser(name, help=hlp)
        _common(p, grid=12)
        p.add_argument("--set", dest="set_path", help="set file (default: a random set drawn from --seed)")
        p.add_argument("--alpha", type=_fraction, default=Fraction(2))
        p.add_argument("--seq-length", type=_positive, dest="seq_length")
    return ap


def _golden(args) -> dict:
    return verify.load_golden(getattr(args, "golden", None))


def _load_set(path: str) -> DyadicSet:
    try:
        return DyadicSet.from_json(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read set file {path}: {exc}") from exc


def _config(args) -> Config:
    return Config(
        grid_level=getattr(args, "grid_level", 14),
        alpha=getattr(args, "alpha", Fraction(2)),
        seq_length=getattr(args, "seq_length", None),
        seed=getattr(args, "seed", 0),
        output_format=getattr(args, "output_format", "json"),
    )


def _run_tfr(args) -> tuple[str, bool]:
    f = _load_set(args.set_path)
    try:
        forests = tfr_global(f)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.k is not None:
        forests = [fr for fr in forests if fr.k == args.k]
        if not forests:
            raise UsageError(f"--k must lie in [1, {len(tfr_global(f))}]")
    return dump_forests(forests) + "\n", True


def _universe(args, cfg: Config) -> TileUniverse:
    rng = np.random.default_rng(cfg.seed)
    if args.set_path:
        f = _load_set(args.set_path)
        if f.level > cfg.grid_level:
            raise UsageError(f"set level {f.level} exceeds --grid {cfg.grid_level}")
    else:
        f = random_dyadic_set(rng, min(cfg.grid_level, 10))
    seq = cfg.sequence()
    return TileUniverse.build(f, Linearizer.random(cfg.grid_level, seq, rng), seq)


def _run_tiles(args, cfg: Config) -> tuple[str, bool]:
    u = _universe(args, cfg)
    classes = classify_tiles(u)
    head = {"grid_level": cfg.grid_level, "set": json.loads(u.f.to_json()), "terms": list(u.seq.terms)}
    if args.which == "classify":
        rows = []
        for k in u.scales:
            ids = u.ids_at_scale(k)
            lab = classes.label[ids]
            rows.append({"k": k, "zero": int((lab == 0).sum()), "cluster": int((lab == 1).sum()), "sep": int((lab == 2).sum())})
        if cfg.output_format == "csv":
            lines = ["k,zero,cluster,sep"] + [f"{r['k']},{r['zero']},{r['cluster']},{r['sep']}" for r in rows]
            return "\n".join(lines) + "\n", True
        return json.dumps({**head, "scales": rows}, indent=1, sort_keys=True) + "\n", True
    trees = decompose_all(u, classes)
    recs = []
    for (l, n), fam in sorted(trees.items()):
        star_foliation(fam)
        for t in fam:
            recs.append({"l": t.l, "n": t.n, "m": t.m, "p": t.p, "top": tile_record(t.top), "size": len(t.members)})
    if cfg.output_format == "csv":
        lines = ["l,n,m,p,k,omega_index,interval_index,size"]
        for r in recs:
            top = r["top"]
            lines.append(f"{r['l']},{r['n']},{r['m']},{r['p']},{top['k']},{top['omega_index']},{top['interval_index']},{r['size']}")
        return "\n".join(lines) + "\n", True
    return json.dumps({**head, "trees": recs}, indent=1, sort_keys=True) + "\n", True


def _experiment(args, cfg: Config) -> verify.ExperimentReport:
    g = _golden(args)
    cmd, which = args.command, getattr(args, "which", None)
    L, seed = cfg.grid_level, cfg.seed
    if cmd == "carleson" and which == "lower":
        return verify.lower_bound_experiment(args.big_n, grid_level=L, seq=cfg.sequence(), golden=g)
    if cmd == "carleson":
        return verify.upper_bound_experiment(args.trials, grid_level=L, seed=seed, golden=g)
    if cmd == "zygmund":
        return verify.zygmund_experiment(args.big_n, args.s_range, samples=args.samples, seed=seed, golden=g)
    if cmd == "walsh":
        return verify.walsh_sharpness_experiment(args.n_range, grid_level=L, golden=g)
    if which == "packing":
        return verify.packing_check(args.trials, seed=seed, grid_level=L)
    if which == "foliation":
        return verify.foliation_overlap_check(args.trials, seed=seed, grid_level=L)
    if which == "main-lemma":
        return verify.main_lemma_check(args.trials, seed=seed, grid_level=L, golden=g)
    if which == "tree-l2":
        return verify.tree_l2_check(trials=args.trials, seed=seed, grid_level=L, golden=g)
    return verify.tfr_invariants_check(args.trials, level=L, seed=seed)


def _dispatch(args) -> tuple[str, bool, str | None]:
    if args.command == "tfr":
        text, ok = _run_tfr(args)
        return text, ok, None
    cfg = _config(args)
    if args.command == "tiles":
        text, ok = _run_tiles(args, cfg)
        return text, ok, None
    try:
        rep = _experiment(args, cfg)
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from exc
    text = verify.reports_to_csv([rep]) if cfg.output_format == "csv" else verify.reports_to_json([rep])
    return text, rep.passed, rep.summary()


def run(argv: list[str] | None = None) -> int:
    """Parse ``argv``, run the command and write its report; returns the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        text, ok, summary = _dispatch(args)
    except UsageError as exc:
        print(f"tilelab: error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if summary:
        print(summary, file=sys.stderr)
    return 0 if ok else 1


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
