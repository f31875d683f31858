"""Time-frequency regularization of a set at the zero frequency.

A node of the recursion is addressed by a word over ``{"U", "L"}``; the
root has the empty word. Every node receives a disjoint family of dyadic
intervals, picks a threshold frequency by the saturation rule, emits the
dyadic intervals of the threshold size that hold input members, and hands
the strictly smaller members to its ``U`` child and the strictly larger
members to its ``L`` child.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .dyadic import DyadicInterval
from .setmodel import DyadicSet, k_F, level_sets, measure

__all__ = [
    "ZeroFreqTile",
    "TfrNode",
    "TfrForest",
    "StepResult",
    "tfr_step",
    "tfr_build",
    "tfr_global",
    "base_of",
    "children_of",
    "frequencies_of_node",
    "frequencies_of_tile",
    "forest_to_dict",
]


@dataclass(frozen=True, order=True)
class ZeroFreqTile:
    """The tile ``[0, |I|**-1) x I``, identified with its time interval."""

    interval: DyadicInterval

    @property
    def top_frequency(self) -> int:
        """Right endpoint of ``omega_R``; the tile holds frequencies ``[0, top)``."""
        return 1 << self.interval.level

    def __contains__(self, alpha: int) -> bool:
        return 0 <= alpha < self.top_frequency


@dataclass(frozen=True)
class StepResult:
    alpha: int
    b: tuple[DyadicInterval, ...]
    b_upper: tuple[DyadicInterval, ...]
    b_lower: tuple[DyadicInterval, ...]


def tfr_step(a: Sequence[DyadicInterval]) -> StepResult:
    """One pass of the saturation rule over a disjoint family ``a``."""
    a = sorted(set(a))
    if not a:
        raise ValueError("tfr_step needs a non-empty family")
    for x, y in zip(a, a[1:]):
        if x.intersects(y):
            raise ValueError(f"input family is not disjoint: {x}, {y}")
    # work in units of the finest cell so sizes are integers
    finest = max(iv.level for iv in a)
    total = sum(1 << (finest - iv.level) for iv in a)
    by_size: dict[int, int] = {}
    for iv in a:
        by_size[iv.level] = by_size.get(iv.level, 0) + (1 << (finest - iv.level))
    acc = 0
    sat_level = None
    for level in sorted(by_size, reverse=True):  # smallest sizes first
        acc += by_size[level]
        if 2 * acc >= total:
            sat_level = level
            break
    assert sat_level is not None
    b = sorted({iv.ancestor(sat_level) for iv in a if iv.level >= sat_level})
    upper = tuple(iv for iv in a if iv.level > sat_level)
    lower = tuple(iv for iv in a if iv.level < sat_level)
    return StepResult(1 << sat_level, tuple(b), upper, lower)


@dataclass(eq=False)
class TfrNode:
    word: str
    alpha: int | None
    c_set: tuple[DyadicInterval, ...]
    child_u: TfrNode | None = None
    child_l: TfrNode | None = None
    inputs: tuple[DyadicInterval, ...] = field(default=(), repr=False)

    @property
    def tiles(self) -> tuple[ZeroFreqTile, ...]:
        return tuple(ZeroFreqTile(iv) for iv in self.c_set)

    @property
    def depth(self) -> int:
        return len(self.word)

    def walk(self) -> Iterator[TfrNode]:
        """Pre-order traversal of this node and all descendants."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            for child in (node.child_l, node.child_u):
                if child is not None:
                    stack.append(child)


def _build_node(word: str, a: Sequence[DyadicInterval]) -> TfrNode:
    if not a:
        return TfrNode(word, None, ())
    step = tfr_step(a)
    node = TfrNode(word, step.alpha, step.b, inputs=tuple(sorted(a)))
    if step.b_upper:
        node.child_u = _build_node(word + "U", step.b_upper)
    if step.b_lower:
        node.child_l = _build_node(word + "L", step.b_lower)
    return node


def tfr_build(
    f: DyadicSet,
    k: int,
    i: DyadicInterval,
    lower_family: Sequence[DyadicInterval] | None = None,
) -> TfrNode:
    """Run the recursion below the level set interval ``i`` of ``level_sets(f, k)``.

    ``lower_family`` may pass precomputed ``level_sets(f, k - 1).intervals``.
    """
    if k < 2:
        raise ValueError("the recursion is defined for k >= 2")
    if lower_family is None:
        if i not in level_sets(f, k).intervals:
            raise ValueError(f"{i} is not a maximal interval of level set {k}")
        lower_family = level_sets(f, k - 1).intervals
    a = [j for j in lower_family if i.contains(j)]
    return _build_node("", a)


@dataclass(eq=False)
class TfrForest:
    k: int
    roots: dict[DyadicInterval, TfrNode | None]
    _index: dict[DyadicInterval, tuple[DyadicInterval, str]] = field(
        default_factory=dict, repr=False
    )

    def __post_init__(self) -> None:
        for top, tree in self.roots.items():
            self._index[top] = (top, "0")
            if tree is None:
                continue
            for node in tree.walk():
                for iv in node.c_set:
                    if iv in self._index:
                        raise AssertionError(f"{iv} appears in two nodes of forest k={self.k}")
                    self._index[iv] = (top, node.word)

    def root_tiles(self) -> list[ZeroFreqTile]:
        return [ZeroFreqTile(iv) for iv in self.roots]

    def nodes(self) -> Iterator[tuple[DyadicInterval, TfrNode]]:
        for top, tree in self.roots.items():
            if tree is not None:
                for node in tree.walk():
                    yield top, node

    def tiles(self) -> list[ZeroFreqTile]:
        return [ZeroFreqTile(iv) for iv in self._index]

    def non_root_tiles(self) -> list[ZeroFreqTile]:
        return [ZeroFreqTile(iv) for iv, (top, w) in self._index.items() if w != "0"]

    def locate(self, r: ZeroFreqTile) -> tuple[DyadicInterval, str]:
        """``(I, word)`` of the node holding ``r``; root tiles report the word ``"0"``."""
        try:
            return self._index[r.interval]
        except KeyError:
            raise KeyError(f"{r.interval} is not a tile of forest k={self.k}") from None

    def node(self, top: DyadicInterval, word: str) -> TfrNode | None:
        cur = self.roots[top]
        for s in word:
            if cur is None:
                return None
            cur = cur.child_u if s == "U" else cur.child_l
        return cur

    def __contains__(self, r: ZeroFreqTile) -> bool:
        return r.interval in self._index


def tfr_global(f: DyadicSet) -> list[TfrForest]:
    """Forests for ``k = 1 .. k_F``; forest ``k=1`` holds only the root tiles."""
    if measure(f) == 0:
        raise ValueError("the regularization of a null set is empty")
    kf = k_F(f)
    families = {k: level_sets(f, k).intervals for k in range(1, kf + 1)}
    forests = [TfrForest(1, {iv: None for iv in families[1]})]
    for k in range(2, kf + 1):
        roots = {}
        for top in families[k]:
            roots[top] = tfr_build(f, k, top, lower_family=families[k - 1])
        forests.append(TfrForest(k, roots))
    return forests


def base_of(r: ZeroFreqTile, forest: TfrForest) -> ZeroFreqTile:
    """Minimal tile of the forest whose interval strictly contains ``I_R``."""
    top, word = forest.locate(r)
    if word == "0":
        raise ValueError(f"{r.interval} is a root tile and has no base")
    iv = r.interval
    # ancestors of I_R up to the root: the first one that is a forest tile is the base
    for level in range(iv.level - 1, top.level - 1, -1):
        cand = iv.ancestor(level)
        if cand in forest._index:
            return ZeroFreqTile(cand)
    raise AssertionError(f"no base found for {iv}")


def children_of(rbar: ZeroFreqTile, forest: TfrForest) -> list[ZeroFreqTile]:
    """All non-root tiles whose base is ``rbar``."""
    return sorted(
        r for r in forest.non_root_tiles() if base_of(r, forest) == rbar
    )


def frequencies_of_tile(
    freqs: Sequence[int], r: ZeroFreqTile, forest: TfrForest
) -> list[int]:
    """Frequencies in ``omega_R`` but not in the base's ``omega``."""
    base = base_of(r, forest)
    return [a for a in freqs if a in r and a not in base]


def frequencies_of_node(
    freqs: Sequence[int], node: TfrNode, forest: TfrForest
) -> list[int]:
    """The frequency set of a node, read off any of its tiles."""
    if not node.c_set:
        raise ValueError("empty node has no frequency set")
    r = ZeroFreqTile(node.c_set[0])
    return frequencies_of_tile(freqs, r, forest)


def forest_to_dict(forest: TfrForest) -> dict:
    """JSON-ready dump: one record per root, nodes listed in pre-order."""

    def iv_dict(iv: DyadicInterval) -> dict:
        return {"level": iv.level, "index": iv.index}

    roots = []
    for top, tree in sorted(forest.roots.items()):
        nodes = []
        if tree is not None:
            for node in sorted(tree.walk(), key=lambda n: (len(n.word), n.word)):
                nodes.append(
                    {
                        "word": node.word,
                        "alpha": node.alpha,
                        "tiles": [iv_dict(iv) for iv in node.c_set],
                    }
                )
        roots.append({"interval": iv_dict(top), "nodes": nodes})
    return {"k": forest.k, "roots": roots}


def dump_forests(forests: Sequence[TfrForest]) -> str:
    return json.dumps([forest_to_dict(fr) for fr in forests], indent=1, sort_keys=True)
