import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_hypergraph
from oracles import naive_reach, subsets
from ergodix.errors import DimensionError, ModelError
from ergodix.hypergraph import (
    Hyperarc,
    Hypergraph,
    ReachStats,
    from_mask,
    insert_minimal,
    is_invariant,
    minimal_arcs,
    reach,
    reach_masks,
    to_dot,
    to_mask,
)

BUILTIN_PLUS = Hypergraph(3, (Hyperarc([1], 1), Hyperarc([3], 3), Hyperarc([3], 2), Hyperarc([2, 3], 1)))


def test_hyperarc_requires_nonempty_sides():
    with pytest.raises(ModelError):
        Hyperarc([], [1])
    with pytest.raises(ModelError):
        Hyperarc([1], [])


def test_hyperarc_int_head():
    assert Hyperarc([2, 1], 3) == Hyperarc({1, 2}, {3})


def test_nodes_must_be_in_range():
    with pytest.raises(ModelError, match="outside 1..2"):
        Hypergraph(2, (Hyperarc([1], [3]),))


def test_size():
    assert BUILTIN_PLUS.size == 3 + 2 + 2 + 2 + 3
    assert Hypergraph(5).size == 5


def test_reach_empty_source():
    assert reach(set(), BUILTIN_PLUS) == frozenset()


def test_reach_without_arcs():
    assert reach({1, 3}, Hypergraph(4)) == {1, 3}


def test_reach_builtin_plus():
    assert reach({3}, BUILTIN_PLUS) == {1, 2, 3}
    assert reach({2}, BUILTIN_PLUS) == {2}
    assert reach({1}, BUILTIN_PLUS) == {1}


def test_reach_rejects_out_of_range():
    with pytest.raises(DimensionError):
        reach({4}, BUILTIN_PLUS)
    with pytest.raises(DimensionError):
        reach({0}, BUILTIN_PLUS)


def test_is_invariant_examples():
    assert is_invariant(set(), BUILTIN_PLUS)
    assert is_invariant({1, 2, 3}, BUILTIN_PLUS)
    assert is_invariant({2}, BUILTIN_PLUS)
    assert not is_invariant({3}, BUILTIN_PLUS)


def test_set_valued_heads():
    g = Hypergraph(4, (Hyperarc([1, 2], [3, 4]),))
    assert reach({1}, g) == {1}
    assert reach({1, 2}, g) == {1, 2, 3, 4}


def test_insert_minimal_subset_after_superset():
    g = insert_minimal(insert_minimal(Hypergraph(3), Hyperarc([1, 2], 3)), Hyperarc([1], 3))
    assert g.arc_set() == {Hyperarc([1], 3)}


def test_insert_minimal_superset_after_subset():
    g = insert_minimal(insert_minimal(Hypergraph(3), Hyperarc([1], 3)), Hyperarc([1, 2], 3))
    assert g.arc_set() == {Hyperarc([1], 3)}


def test_insert_minimal_keeps_incomparable_tails():
    g = minimal_arcs(3, [Hyperarc([1], 3), Hyperarc([2], 3)])
    assert g.arc_set() == {Hyperarc([1], 3), Hyperarc([2], 3)}


def test_insert_minimal_other_heads_untouched():
    g = minimal_arcs(3, [Hyperarc([1, 2], 3), Hyperarc([1], 2)])
    assert len(g.arcs) == 2


def test_reach_matches_naive_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        g = random_hypergraph(n, rng)
        src = {v for v in range(1, n + 1) if rng.random() < 0.3}
        assert reach(src, g) == naive_reach(src, n, g.arcs)


@given(st.data())
@settings(max_examples=200, deadline=None)
def test_reach_is_monotone_and_idempotent(data):
    seed = data.draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    n = data.draw(st.integers(1, 8))
    g = random_hypergraph(n, rng)
    small = data.draw(st.frozensets(st.integers(1, n)))
    extra = data.draw(st.frozensets(st.integers(1, n)))
    r = reach(small, g)
    assert small <= r
    assert r <= reach(small | extra, g)
    assert reach(r, g) == r


def test_reach_is_smallest_invariant_superset():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(1, 7))
        g = random_hypergraph(n, rng)
        src = frozenset(v for v in range(1, n + 1) if rng.random() < 0.3)
        r = reach(src, g)
        assert is_invariant(r, g)
        free = sorted(r - src)
        for k in range(len(free)):
            for drop in itertools.combinations(free, k):
                assert not is_invariant(src | set(drop), g)


def test_work_bounds():
    rng = np.random.default_rng(5)
    for _ in range(300):
        n = int(rng.integers(1, 9))
        g = random_hypergraph(n, rng)
        stats = ReachStats()
        reach({v for v in range(1, n + 1) if rng.random() < 0.5}, g, stats)
        assert stats.firings <= len(g.arcs)
        assert stats.decrements <= sum(len(d.tail) for d in g.arcs)


def test_minimized_reach_agrees_with_raw_arcs():
    rng = np.random.default_rng(99)
    for _ in range(300):
        n = int(rng.integers(1, 9))
        raw = random_hypergraph(n, rng, singleton_heads=True)
        small = minimal_arcs(n, raw.arcs)
        assert len(small.arcs) <= len(raw.arcs)
        for src in itertools.islice(subsets(n), 40):
            assert reach(src, small) == reach(src, raw)


def test_mask_round_trip():
    for s in subsets(6):
        assert from_mask(to_mask(s)) == s


def test_reach_masks_agrees_with_reach():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(1, 9))
        g = random_hypergraph(n, rng)
        masks = np.arange(1 << n)
        out = reach_masks(masks, g)
        for m in range(1 << n):
            assert from_mask(out[m]) == reach(from_mask(m), g)


def test_reach_masks_empty_input():
    assert reach_masks([], BUILTIN_PLUS).size == 0
    assert reach_masks([5], Hypergraph(3)).tolist() == [5]


def test_concurrent_reach_calls_are_independent():
    from concurrent.futures import ThreadPoolExecutor

    rng = np.random.default_rng(8)
    g = random_hypergraph(8, rng, arcs=30)
    sources = [frozenset(s) for s in itertools.islice(subsets(8), 200)]
    with ThreadPoolExecutor(4) as pool:
        results = list(pool.map(lambda s: reach(s, g), sources))
    assert results == [reach(s, g) for s in sources]


def test_dot_layout():
    text = to_dot(BUILTIN_PLUS, "hplus")
    assert text.startswith("digraph hplus {")
    assert "  3 -> 2;" in text
    assert text.count("shape=diamond") == 1
    assert "  2 -> d3 [arrowhead=none];" in text and "  d3 -> 1;" in text


def test_dot_is_deterministic():
    shuffled = Hypergraph(3, tuple(reversed(BUILTIN_PLUS.arcs)))
    assert to_dot(shuffled) == to_dot(BUILTIN_PLUS)
