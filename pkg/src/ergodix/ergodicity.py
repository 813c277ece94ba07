"""Hypergraphs of a Shapley operator at infinity and the ergodicity certificate.

For a state ``i`` and a nonempty set ``J`` of states, ``(J, {i})`` is an arc
of ``H+`` when ``T_i(alpha 1_J) -> +inf`` as ``alpha -> +inf`` and an arc of
``H-`` when ``T_i(alpha 1_J) -> -inf`` as ``alpha -> -inf``.  The ergodic
equation ``g + T(u) = lambda 1 + u`` is solvable for every ``g`` when no
nontrivial conjugate pair ``(I, J)`` exists, i.e. no disjoint nonempty sets
with ``reach(J, H+) = S \\ I`` and ``reach(I, H-) = S \\ J``.

Both arc predicates are monotone in ``J``, so only inclusion-minimal tails
are stored.  All sets are handled as bitmasks internally (bit ``j-1`` for
state ``j``).
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import DimensionError, EvaluationError, ModelError, ProbeError
from .hypergraph import Hyperarc, Hypergraph, from_mask, reach, reach_masks, to_mask
from .model import GameModel, ShapleyOperator, as_vector, recession_numeric

MAX_STATES = 24
CHUNK = 1 << 14


@dataclass(frozen=True)
class HypergraphPair:
    hplus: Hypergraph
    hminus: Hypergraph
    provenance_plus: str = "exact"
    provenance_minus: str = "exact"

    def __post_init__(self):
        if self.hplus.n != self.hminus.n:
            raise ModelError("H+ and H- must share the node set")
        for g in (self.hplus, self.hminus):
            if any(len(d.head) != 1 for d in g.arcs):
                raise ModelError("operator hypergraphs have singleton heads")

    @property
    def n(self) -> int:
        return self.hplus.n

    @property
    def provenance(self) -> str:
        """Weakest provenance of the two hypergraphs: probed < declared < exact."""
        order = ["probed", "declared", "exact"]
        return min(self.provenance_plus, self.provenance_minus, key=order.index)


@dataclass(frozen=True)
class ConjugatePair:
    iset: frozenset[int]
    jset: frozenset[int]

    @classmethod
    def checked(cls, iset: Iterable[int], jset: Iterable[int], pair: HypergraphPair) -> ConjugatePair:
        i, j = frozenset(iset), frozenset(jset)
        full = frozenset(range(1, pair.n + 1))
        if i & j:
            raise ModelError(f"conjugate sets must be disjoint: {sorted(i)}, {sorted(j)}")
        if reach(j, pair.hplus) != full - i or reach(i, pair.hminus) != full - j:
            raise ModelError(f"({sorted(i)}, {sorted(j)}) is not a conjugate pair")
        return cls(i, j)

    @property
    def trivial(self) -> bool:
        return not self.iset or not self.jset


@dataclass(frozen=True)
class ProbeSchedule:
    """Scales at which ``T_i(alpha 1_J)`` is sampled to detect divergence.

    A limit is declared infinite when the last successive gap exceeds
    ``delta`` or the last value is beyond ``limit_bound`` in the probed
    direction; otherwise it is taken as finite.
    """

    alphas: tuple[float, ...] = tuple(2.0 ** m for m in range(4, 61))
    delta: float = 1e-6
    limit_bound: float = 1e15

    def __post_init__(self):
        a = self.alphas
        if len(a) < 2 or any(x <= 0 for x in a) or any(y <= x for x, y in zip(a, a[1:])):
            raise ValueError("alphas must be positive and strictly increasing, at least two of them")
        if not self.delta > 0:
            raise ValueError("delta must be positive")


# ---------------------------------------------------------------------------
# builders


def _check_n(n: int) -> None:
    if n > MAX_STATES:
        raise DimensionError(f"subset enumeration supports at most {MAX_STATES} states, got {n}")


def _all_masks(n: int) -> np.ndarray:
    return np.arange(1 << n, dtype=np.int64)


def _upward_closure(pos: np.ndarray, n: int) -> np.ndarray:
    pos = pos.copy()
    masks = _all_masks(n)
    for j in range(n):
        bit = 1 << j
        has = (masks & bit) != 0
        pos[has] |= pos[masks[has] ^ bit]
    return pos


def _minimal_tails(pos: np.ndarray, n: int) -> list[int]:
    """Inclusion-minimal masks of an upward-closed predicate indexed by mask."""
    masks = _all_masks(n)
    dominated = np.zeros_like(pos)
    for j in range(n):
        bit = 1 << j
        has = (masks & bit) != 0
        dominated[has] |= pos[masks[has] ^ bit]
    return masks[pos & ~dominated].tolist()


def _hypergraph(n: int, preds: list[np.ndarray]) -> Hypergraph:
    arcs = []
    for i, pos in enumerate(preds, start=1):
        pos = _upward_closure(pos, n)
        arcs.extend(Hyperarc(from_mask(m), i) for m in _minimal_tails(pos, n))
    return Hypergraph(n, tuple(arcs))


def build_pair_finite(game: GameModel) -> HypergraphPair:
    """Exact ``(H+, H-)`` of a finite game from the supports of its transitions.

    ``(J, {i})`` is in ``H-`` iff some MIN action gives ``J`` positive mass
    against every MAX response, and in ``H+`` iff every MIN action admits a
    MAX response giving ``J`` positive mass.
    """
    n = game.n
    _check_n(n)
    masks = _all_masks(n)
    plus, minus = [], []
    for state_supports in game.supports:
        p_all = np.ones(masks.size, dtype=bool)
        m_any = np.zeros(masks.size, dtype=bool)
        for row in state_supports:
            hit = (masks[:, None] & np.array(row, dtype=np.int64)[None, :]) != 0
            p_all &= hit.any(axis=1)
            m_any |= hit.all(axis=1)
        p_all[0] = m_any[0] = False
        plus.append(p_all)
        minus.append(m_any)
    return HypergraphPair(_hypergraph(n, plus), _hypergraph(n, minus), "exact", "exact")


def _oracle_preds(handle: ShapleyOperator, sign: int) -> list[np.ndarray]:
    n = handle.n
    preds = []
    for i in range(1, n + 1):
        pos = np.zeros(1 << n, dtype=bool)
        for m in range(1, 1 << n):
            pos[m] = handle.hyperarc_oracle(from_mask(m), i, sign)
        preds.append(pos)
    return preds


def _indicator_rows(masks: np.ndarray, n: int) -> np.ndarray:
    return ((masks[:, None] >> np.arange(n)[None, :]) & 1).astype(float)


def _probe_preds(handle: ShapleyOperator, schedule: ProbeSchedule, sign: int) -> list[np.ndarray]:
    n = handle.n
    alphas = sign * np.asarray(schedule.alphas)
    preds = np.zeros((n, 1 << n), dtype=bool)
    masks = _all_masks(n)[1:]
    step = max(1, (1 << 20) // (alphas.size * n))
    for start in range(0, masks.size, step):
        chunk = masks[start:start + step]
        xs = (alphas[None, :, None] * _indicator_rows(chunk, n)[:, None, :]).reshape(-1, n)
        try:
            vals = handle.eval_batch(xs).reshape(chunk.size, alphas.size, n)
        except EvaluationError:
            _locate_failure(handle, chunk, alphas)
            raise
        last, prev = vals[:, -1, :], vals[:, -2, :]
        with np.errstate(invalid="ignore"):
            diverges = (sign * last > schedule.limit_bound) | (np.abs(last - prev) > schedule.delta)
        preds[:, chunk] = diverges.T
    return list(preds)


def _locate_failure(handle, chunk, alphas):
    n = handle.n
    for m in chunk.tolist():
        x = _indicator_rows(np.array([m]), n)[0]
        for a in alphas.tolist():
            try:
                handle(a * x)
            except EvaluationError as exc:
                tail = from_mask(m)
                raise ProbeError(f"probe at J={sorted(tail)}, alpha={a!r} failed: {exc}",
                                 state=None, tail=tail, alpha=a) from None


def _declared_preds(n: int, arcs: Iterable[Hyperarc]) -> list[np.ndarray]:
    preds = [np.zeros(1 << n, dtype=bool) for _ in range(n)]
    for d in arcs:
        (i,) = d.head
        preds[i - 1][to_mask(d.tail)] = True
    return preds


def build_pair_probed(
    handle: ShapleyOperator,
    schedule: ProbeSchedule | None = None,
    *,
    declared_plus: Iterable[Hyperarc] = (),
    declared_minus: Iterable[Hyperarc] = (),
    use_oracle: bool = True,
) -> HypergraphPair:
    """``(H+, H-)`` of an arbitrary handle.

    An exact hyperarc oracle on the handle wins when ``use_oracle`` is set.
    Otherwise every ``T_i(alpha 1_J)`` is probed along ``schedule``; declared
    arcs are added on top of the probed ones.
    """
    n = handle.n
    _check_n(n)
    schedule = schedule or ProbeSchedule()
    if use_oracle and handle.hyperarc_oracle is not None:
        plus, minus = _oracle_preds(handle, +1), _oracle_preds(handle, -1)
        return HypergraphPair(_hypergraph(n, plus), _hypergraph(n, minus), "exact", "exact")

    out = []
    for sign, declared in ((+1, tuple(declared_plus)), (-1, tuple(declared_minus))):
        preds = _probe_preds(handle, schedule, sign)
        if declared:
            preds = [p | q for p, q in zip(preds, _declared_preds(n, declared))]
        out.append((_hypergraph(n, preds), "declared" if declared else "probed"))
    (hp, pp), (hm, pm) = out
    return HypergraphPair(hp, hm, pp, pm)


# ---------------------------------------------------------------------------
# conjugate pairs


def _workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("ERGODIX_THREADS", "1") or 1)
    return max(1, workers)


def _scan(pair: HypergraphPair, lo: int, hi: int) -> int | None:
    full = (1 << pair.n) - 1
    imasks = np.arange(lo, hi, dtype=np.int64)
    jmasks = full & ~reach_masks(imasks, pair.hminus)
    hits = (jmasks != 0) & (reach_masks(jmasks, pair.hplus) == (full & ~imasks))
    idx = np.flatnonzero(hits)
    return int(imasks[idx[0]]) if idx.size else None


def _search(pair: HypergraphPair, workers: int | None = None) -> tuple[ConjugatePair | None, int]:
    n = pair.n
    _check_n(n)
    total = (1 << n) - 1
    bounds = [(lo, min(lo + CHUNK, total + 1)) for lo in range(1, total + 1, CHUNK)]
    w = _workers(workers)
    if w == 1 or len(bounds) == 1:
        found = None
        for lo, hi in bounds:
            found = _scan(pair, lo, hi)
            if found is not None:
                break
    else:
        with ThreadPoolExecutor(max_workers=w) as pool:
            results = list(pool.map(lambda b: _scan(pair, *b), bounds))
        found = min((r for r in results if r is not None), default=None)
    if found is None:
        return None, total
    iset = from_mask(found)
    jset = frozenset(range(1, n + 1)) - reach(iset, pair.hminus)
    return ConjugatePair.checked(iset, jset, pair), found


def find_nontrivial_conjugate(pair: HypergraphPair, workers: int | None = None) -> ConjugatePair | None:
    """First nontrivial conjugate pair in ascending bitmask order of ``I``.

    For each nonempty ``I`` the only candidate is ``J = S \\ reach(I, H-)``,
    which is disjoint from ``I``; it is a witness when nonempty and
    ``reach(J, H+) = S \\ I``.
    """
    return _search(pair, workers)[0]


def first_invariant_complement(pair: HypergraphPair) -> frozenset[int] | None:
    """First nonempty ``I`` with ``S \\ I`` invariant in ``H+`` and ``reach(I, H-) != S``.

    Every nontrivial conjugate pair produces such an ``I``; this is the
    per-subset test usually quoted for the condition, kept for cross-checks.
    """
    n = pair.n
    full = (1 << n) - 1
    imasks = np.arange(1, full + 1, dtype=np.int64)
    comp = full & ~imasks
    bad = (reach_masks(comp, pair.hplus) == comp) & (reach_masks(imasks, pair.hminus) != full)
    idx = np.flatnonzero(bad)
    return from_mask(int(imasks[idx[0]])) if idx.size else None


@dataclass
class ErgodicityCertificate:
    ergodic: bool
    witness: ConjugatePair | None
    subsets_examined: int
    provenance: str
    arcs_plus: int
    arcs_minus: int
    wall_time: float = field(default=0.0, compare=False)

    @property
    def verdict(self) -> str:
        return "ERGODIC" if self.ergodic else "NONERGODIC"

    @property
    def claim(self) -> str:
        if not self.ergodic:
            return "a nontrivial conjugate pair exists; some slice space is unbounded"
        if self.provenance == "exact":
            return "all slice spaces are bounded; g + T has an eigenpair for every g"
        return "numeric evidence only: hypergraphs were probed, not computed exactly"

    def to_dict(self) -> dict:
        """Byte-stable summary (wall time excluded)."""
        return {
            "verdict": self.verdict,
            "witness": None if self.witness is None else {
                "I": sorted(self.witness.iset), "J": sorted(self.witness.jset)},
            "provenance": self.provenance,
            "subsets_examined": self.subsets_examined,
            "hyperarcs": {"plus": self.arcs_plus, "minus": self.arcs_minus},
        }

    def to_text(self) -> str:
        lines = [f"{self.verdict} (provenance: {self.provenance})"]
        if self.witness is not None:
            lines.append(f"witness I={sorted(self.witness.iset)} J={sorted(self.witness.jset)}")
        lines.append(f"hyperarcs: H+ {self.arcs_plus}, H- {self.arcs_minus} (minimal tails)")
        lines.append(f"subsets examined: {self.subsets_examined}")
        lines.append(self.claim)
        return "\n".join(lines)


def certify(pair: HypergraphPair, workers: int | None = None) -> ErgodicityCertificate:
    t0 = time.perf_counter()
    witness, examined = _search(pair, workers)
    return ErgodicityCertificate(
        ergodic=witness is None,
        witness=witness,
        subsets_examined=examined,
        provenance=pair.provenance,
        arcs_plus=len(pair.hplus.arcs),
        arcs_minus=len(pair.hminus.arcs),
        wall_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# recession fixed points


@dataclass(frozen=True)
class RecessionCheck:
    status: str  # fixed | not_fixed | inconclusive
    distance: float
    instability: float

    @property
    def fixed(self) -> bool | None:
        return {"fixed": True, "not_fixed": False}.get(self.status)


def recession_fixed_point_check(handle: ShapleyOperator, x, alpha_max: float = 2.0 ** 20,
                                tol: float = 1e-4, steps: int = 4) -> RecessionCheck:
    """Is ``x`` a fixed point of the recession map ``lim T(alpha x) / alpha``?

    Probes at ``alpha_max / 2^k`` for ``k = steps-1..0``.  The answer is
    inconclusive when successive probes move by more than ``tol``.
    """
    x = as_vector(x, handle.n)
    alphas = [alpha_max / 2.0 ** k for k in range(steps - 1, -1, -1)]
    probes = [recession_numeric(handle, x, a) for a in alphas]
    instability = max((float(np.max(np.abs(b - a))) for a, b in zip(probes, probes[1:])), default=0.0)
    distance = float(np.max(np.abs(probes[-1] - x)))
    if instability > tol:
        status = "inconclusive"
    elif distance <= tol:
        status = "fixed"
    else:
        status = "not_fixed"
    return RecessionCheck(status, distance, instability)
