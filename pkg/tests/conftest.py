from __future__ import annotations

import numpy as np
import pytest

from ergodix.hypergraph import Hyperarc, Hypergraph
from ergodix.model import GameModel

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_game(n: int, rng: np.random.Generator, actions: tuple[int, int] = (3, 3),
                density: float = 0.4, ragged: bool = False) -> GameModel:
    """Random finite game; ``density`` controls the transition supports."""
    pay, trans = [], []
    for _ in range(n):
        na = int(rng.integers(1, actions[0] + 1)) if ragged else actions[0]
        r_i, p_i = [], []
        for _ in range(na):
            nb = int(rng.integers(1, actions[1] + 1)) if ragged else actions[1]
            r_ia, p_ia = [], []
            for _ in range(nb):
                p = rng.random(n) * (rng.random(n) < density)
                if p.sum() == 0:
                    p[rng.integers(n)] = 1.0
                r_ia.append(float(rng.normal()))
                p_ia.append((p / p.sum()).tolist())
            r_i.append(r_ia)
            p_i.append(p_ia)
        pay.append(r_i)
        trans.append(p_i)
    return GameModel.from_tables(pay, trans, renormalize=True)


def random_hypergraph(n: int, rng: np.random.Generator, arcs: int | None = None,
                      singleton_heads: bool = False) -> Hypergraph:
    count = int(rng.integers(0, 3 * n + 1)) if arcs is None else arcs
    out = []
    for _ in range(count):
        tail = [v for v in range(1, n + 1) if rng.random() < 0.3] or [int(rng.integers(1, n + 1))]
        if singleton_heads:
            head = [int(rng.integers(1, n + 1))]
        else:
            head = [v for v in range(1, n + 1) if rng.random() < 0.25] or [int(rng.integers(1, n + 1))]
        out.append(Hyperarc(tail, head))
    return Hypergraph(n, tuple(out))


def absorbing_pair_game() -> GameModel:
    """Two absorbing states, zero payments."""
    return GameModel.from_tables([[[0.0]], [[0.0]]], [[[[1.0, 0.0]]], [[[0.0, 1.0]]]])


def stay_go_game(go_payment: float = 0.0) -> GameModel:
    """State 1: MIN chooses stay (r=0) or go to 2 (r=go_payment); state 2 absorbing."""
    return GameModel.from_tables(
        [[[0.0], [go_payment]], [[0.0]]],
        [[[[1.0, 0.0]], [[0.0, 1.0]]], [[[0.0, 1.0]]]],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
