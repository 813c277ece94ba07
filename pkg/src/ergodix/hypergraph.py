"""Directed hypergraphs over the nodes ``1..n`` with linear-time reachability."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

from .errors import DimensionError, ModelError


def _states(xs: Iterable[int]) -> frozenset[int]:
    return frozenset(int(x) for x in xs)


@dataclass(frozen=True)
class Hyperarc:
    """An arc from a set of tail nodes to a set of head nodes.

    Tail and head must be nonempty.  They may overlap: the hypergraphs built
    from Shapley operators contain loops such as ``({i}, {i})``, which never
    change a reachable set but are part of the operator's description.
    """

    tail: frozenset[int]
    head: frozenset[int]

    def __init__(self, tail: Iterable[int], head: Iterable[int] | int):
        if isinstance(head, int):
            head = (head,)
        object.__setattr__(self, "tail", _states(tail))
        object.__setattr__(self, "head", _states(head))
        if not self.tail or not self.head:
            raise ModelError(f"hyperarc needs a nonempty tail and head, got {self}")

    def key(self) -> tuple:
        return (len(self.tail), sorted(self.tail), sorted(self.head))

    def __repr__(self) -> str:
        return f"({sorted(self.tail)} -> {sorted(self.head)})"


@dataclass(frozen=True)
class Hypergraph:
    n: int
    arcs: tuple[Hyperarc, ...] = ()

    def __post_init__(self):
        if self.n < 0:
            raise ModelError("node count must be nonnegative")
        object.__setattr__(self, "arcs", tuple(self.arcs))
        for d in self.arcs:
            bad = [v for v in d.tail | d.head if not 1 <= v <= self.n]
            if bad:
                raise ModelError(f"hyperarc {d!r} references nodes outside 1..{self.n}: {bad}")

    @property
    def size(self) -> int:
        """``n + sum(|tail| + |head|)``, the input size of reachability."""
        return self.n + sum(len(d.tail) + len(d.head) for d in self.arcs)

    def arc_set(self) -> frozenset[Hyperarc]:
        return frozenset(self.arcs)

    def sorted_arcs(self) -> list[Hyperarc]:
        return sorted(set(self.arcs), key=Hyperarc.key)

    @cached_property
    def _index(self):
        occurs: list[list[int]] = [[] for _ in range(self.n + 1)]
        for k, d in enumerate(self.arcs):
            for v in d.tail:
                occurs[v].append(k)
        tail_sizes = [len(d.tail) for d in self.arcs]
        heads = [tuple(d.head) for d in self.arcs]
        return occurs, tail_sizes, heads

    @cached_property
    def _masks(self) -> tuple[np.ndarray, np.ndarray]:
        if self.n > 62:
            raise DimensionError("bitmask reachability supports at most 62 nodes")
        tails = np.array([to_mask(d.tail) for d in self.arcs], dtype=np.int64)
        heads = np.array([to_mask(d.head) for d in self.arcs], dtype=np.int64)
        return tails, heads


@dataclass
class ReachStats:
    """Work counters of one :func:`reach` call."""

    firings: int = 0
    decrements: int = 0


def _check_source(source: Iterable[int], n: int) -> frozenset[int]:
    src = _states(source)
    bad = [v for v in src if not 1 <= v <= n]
    if bad:
        raise DimensionError(f"nodes {sorted(bad)} outside 1..{n}")
    return src


def reach(source: Iterable[int], g: Hypergraph, stats: ReachStats | None = None) -> frozenset[int]:
    """Nodes reachable from ``source`` in ``g``.

    Forward chaining: every arc counts its tail nodes not yet reached and
    fires once, when the count hits zero.  Total work is ``O(size(g))``.
    """
    src = _check_source(source, g.n)
    occurs, tail_sizes, heads = g._index
    remaining = tail_sizes.copy()
    reached = bytearray(g.n + 1)
    stack = list(src)
    for v in stack:
        reached[v] = 1
    firings = decrements = 0
    while stack:
        v = stack.pop()
        for k in occurs[v]:
            decrements += 1
            remaining[k] -= 1
            if remaining[k] == 0:
                firings += 1
                for w in heads[k]:
                    if not reached[w]:
                        reached[w] = 1
                        stack.append(w)
    if stats is not None:
        stats.firings += firings
        stats.decrements += decrements
    return frozenset(v for v in range(1, g.n + 1) if reached[v])


def is_invariant(s: Iterable[int], g: Hypergraph) -> bool:
    s = _check_source(s, g.n)
    return reach(s, g) <= s


def insert_minimal(g: Hypergraph, arc: Hyperarc) -> Hypergraph:
    """Insert ``arc`` keeping only inclusion-minimal tails per head.

    Skips ``arc`` if an arc with the same head already has a tail inside
    ``arc.tail``; otherwise drops same-head arcs whose tail contains it.
    Reachability is unchanged for tail-monotone arc families.
    """
    kept = []
    for d in g.arcs:
        if d.head == arc.head:
            if d.tail <= arc.tail:
                return g
            if d.tail >= arc.tail:
                continue
        kept.append(d)
    kept.append(arc)
    return Hypergraph(g.n, tuple(kept))


def minimal_arcs(n: int, arcs: Iterable[Hyperarc]) -> Hypergraph:
    g = Hypergraph(n)
    for d in arcs:
        g = insert_minimal(g, d)
    return g


# ---------------------------------------------------------------------------
# bitmask form (bit j-1 stands for node j)


def to_mask(states: Iterable[int]) -> int:
    m = 0
    for s in states:
        m |= 1 << (s - 1)
    return m


def from_mask(mask: int) -> frozenset[int]:
    mask = int(mask)
    out = []
    j = 1
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return frozenset(out)


def reach_masks(sources, g: Hypergraph) -> np.ndarray:
    """Vectorized reachability for many source sets given as bitmasks.

    Arcs sweep over all still-growing rows until no row changes; each sweep
    is ``O(#rows * #arcs)`` word operations.  Agrees with :func:`reach`.
    """
    out = np.array(sources, dtype=np.int64, copy=True).reshape(-1)
    if not g.arcs or out.size == 0:
        return out
    tails, heads = g._masks
    active = np.arange(out.size)
    while active.size:
        r = out[active]
        before = r.copy()
        for t, hd in zip(tails.tolist(), heads.tolist()):
            fire = (r & t) == t
            r[fire] |= hd
        changed = r != before
        out[active] = r
        active = active[changed]
    return out


# ---------------------------------------------------------------------------
# DOT export


def to_dot(g: Hypergraph, name: str = "H") -> str:
    """Graphviz rendering; arcs with several tail nodes go through a diamond."""
    lines = [f"digraph {name} {{", "  rankdir=LR;"]
    for v in range(1, g.n + 1):
        lines.append(f'  {v} [shape=circle, label="{v}"];')
    for k, d in enumerate(g.sorted_arcs()):
        tail, head = sorted(d.tail), sorted(d.head)
        if len(tail) == 1:
            for w in head:
                lines.append(f"  {tail[0]} -> {w};")
        else:
            aux = f"d{k}"
            lines.append(f'  {aux} [shape=diamond, label="", width=0.15, height=0.15];')
            for v in tail:
                lines.append(f"  {v} -> {aux} [arrowhead=none];")
            for w in head:
                lines.append(f"  {aux} -> {w};")
    lines.append("}")
    return "\n".join(lines) + "\n"
