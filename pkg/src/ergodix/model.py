"""Game data model, Shapley operators and operator-axiom validation.

A Shapley operator is any map ``T: R^n -> R^n`` that is monotone and
additively homogeneous.  Every operator in this package is wrapped in a
:class:`ShapleyOperator`, which evaluates single vectors as well as batches of
vectors (rows of a 2-D array); the batch path is what the hypergraph probing
and the axiom checks use.

States are numbered ``1..n`` in every user-facing structure (state sets,
hyperarcs, serialized files) and ``0..n-1`` only inside numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionError, EvaluationError, ModelError

ROW_SUM_TOL = 1e-12

BatchFn = Callable[[np.ndarray], np.ndarray]
HyperarcOracle = Callable[[frozenset, int, int], bool]


# ---------------------------------------------------------------------------
# vector utilities


def as_vector(x, n: int | None = None) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise DimensionError(f"expected a vector of length {n}, got {v.shape[0]}")
    return v


def hilbert_seminorm(x) -> float:
    """Return ``max(x) - min(x)``, the oscillation of ``x``."""
    v = np.asarray(x, dtype=float)
    if v.size == 0:
        raise DimensionError("Hilbert seminorm of an empty vector")
    return float(v.max() - v.min())


def indicator(states: Iterable[int], n: int) -> np.ndarray:
    """Indicator vector of a 1-based state set."""
    v = np.zeros(n)
    for s in states:
        if not 1 <= s <= n:
            raise DimensionError(f"state {s} outside 1..{n}")
        v[s - 1] = 1.0
    return v


def h(z):
    """``sup_{0<p<=1} (log p + p z)`` in closed form.

    Equals ``z`` for ``z >= -1`` and ``-1 - log(-z)`` below.  Accepts scalars
    or arrays.
    """
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(z >= -1.0, z, -1.0 - np.log(-np.minimum(z, -1.0)))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# finite games


@dataclass(frozen=True)
class MaxAction:
    name: str
    payment: float
    transition: tuple[float, ...]


@dataclass(frozen=True)
class MinAction:
    name: str
    responses: tuple[MaxAction, ...]


@dataclass(frozen=True)
class GameModel:
    """Finite-state, finite-action zero-sum game with perfect information.

    At state ``i`` player MIN picks a :class:`MinAction`, then player MAX picks
    one of its ``responses``; MIN pays ``payment`` and the next state is drawn
    from ``transition``.
    """

    states: tuple[tuple[MinAction, ...], ...]

    def __post_init__(self):
        n = len(self.states)
        if n < 1:
            raise ModelError("a game needs at least one state")
        for i, actions in enumerate(self.states, start=1):
            if not actions:
                raise ModelError(f"state {i}: no min actions")
            for a in actions:
                if not a.responses:
                    raise ModelError(f"state {i}, min action {a.name!r}: no max actions")
                for b in a.responses:
                    where = f"state {i}, min action {a.name!r}, max action {b.name!r}"
                    if not math.isfinite(b.payment):
                        raise ModelError(f"{where}: payment must be finite")
                    p = b.transition
                    if len(p) != n:
                        raise ModelError(f"{where}: transition has {len(p)} entries, expected {n}")
                    if any(not math.isfinite(q) or q < 0 for q in p):
                        raise ModelError(f"{where}: transition entries must be finite and >= 0")
                    total = math.fsum(p)
                    if abs(total - 1.0) > ROW_SUM_TOL:
                        raise ModelError(f"{where}: transition sums to {total!r}, not 1")

    @classmethod
    def from_tables(
        cls,
        payments: Sequence[Sequence[Sequence[float]]],
        transitions: Sequence[Sequence[Sequence[Sequence[float]]]],
        *,
        renormalize: bool = False,
    ) -> GameModel:
        """Build a game from nested ``[state][min action][max action]`` tables.

        Actions are named ``a1, a2, ...`` and ``b1, b2, ...``.  With
        ``renormalize`` each transition row is divided by its sum first.
        """
        if len(payments) != len(transitions):
            raise ModelError("payments and transitions disagree on the state count")
        states = []
        for i, (r_i, p_i) in enumerate(zip(payments, transitions), start=1):
            if len(r_i) != len(p_i):
                raise ModelError(f"state {i}: payments and transitions disagree on min actions")
            actions = []
            for a, (r_ia, p_ia) in enumerate(zip(r_i, p_i), start=1):
                if len(r_ia) != len(p_ia):
                    raise ModelError(
                        f"state {i}, min action a{a}: payments and transitions disagree on max actions"
                    )
                responses = tuple(
                    MaxAction(f"b{b}", float(r), stochastic_row(p, renormalize))
                    for b, (r, p) in enumerate(zip(r_ia, p_ia), start=1)
                )
                actions.append(MinAction(f"a{a}", responses))
            states.append(tuple(actions))
        return cls(tuple(states))

    @property
    def n(self) -> int:
        return len(self.states)

    @cached_property
    def padded(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(payments, transitions, valid)`` padded to ``(n, A, B[, n])``.

        Missing max actions carry payment ``-inf`` and missing min actions
        ``+inf`` so that the min-max is unaffected by the padding.
        """
        n = self.n
        amax = max(len(acts) for acts in self.states)
        bmax = max(len(a.responses) for acts in self.states for a in acts)
        r = np.full((n, amax, bmax), -np.inf)
        p = np.zeros((n, amax, bmax, n))
        valid = np.zeros((n, amax, bmax), dtype=bool)
        for i, acts in enumerate(self.states):
            r[i, len(acts):, :] = np.inf
            for a, act in enumerate(acts):
                for b, resp in enumerate(act.responses):
                    r[i, a, b] = resp.payment
                    p[i, a, b] = resp.transition
                    valid[i, a, b] = True
        return r, p, valid

    @cached_property
    def supports(self) -> list[list[list[int]]]:
        """Bitmask of the support of each transition row (bit ``j`` = state ``j+1``)."""
        return [
            [[sum(1 << j for j, q in enumerate(resp.transition) if q > 0) for resp in act.responses]
             for act in acts]
            for acts in self.states
        ]

    def shifted(self, g) -> GameModel:
        """Same game with ``g_i`` added to every payment at state ``i``."""
        g = as_vector(g, self.n)
        return GameModel(tuple(
            tuple(
                MinAction(a.name, tuple(MaxAction(b.name, b.payment + float(g[i]), b.transition)
                                        for b in a.responses))
                for a in acts
            )
            for i, acts in enumerate(self.states)
        ))


def stochastic_row(p: Sequence[float], renormalize: bool) -> tuple[float, ...]:
    row = tuple(float(q) for q in p)
    if renormalize:
        total = math.fsum(row)
        if total > 0:
            row = tuple(q / total for q in row)
    return row


def _minmax_batch(r: np.ndarray, p: np.ndarray, xs: np.ndarray) -> np.ndarray:
    # r: (n, A, B), p: (n, A, B, n), xs: (m, n) -> (m, n)
    vals = r[None] + np.einsum("iabj,mj->miab", p, xs)
    return vals.max(axis=3).min(axis=2)


def shapley_apply(game: GameModel, x) -> np.ndarray:
    """``y_i = min_a max_b (r_i^{ab} + P_i^{ab} . x)``."""
    x = as_vector(x, game.n)
    r, p, _ = game.padded
    return _minmax_batch(r, p, x[None])[0]


def recession_apply_finite(game: GameModel, x) -> np.ndarray:
    """Payment-free operator ``y_i = min_a max_b P_i^{ab} . x``."""
    x = as_vector(x, game.n)
    r, p, valid = game.padded
    return _minmax_batch(np.where(valid, 0.0, r), p, x[None])[0]


# ---------------------------------------------------------------------------
# risk-sensitive operators


@dataclass(frozen=True)
class RiskSensitiveModel:
    """``T_i(x) = log(sum_j M_ij exp(x_j))`` for a nonnegative matrix ``M``."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise ModelError(f"risk-sensitive matrix must be square and nonempty, got shape {m.shape}")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ModelError("risk-sensitive matrix entries must be finite and >= 0")
        zero = np.flatnonzero(~np.any(m > 0, axis=1))
        if zero.size:
            raise ModelError(f"risk-sensitive matrix has a zero row at state {zero[0] + 1}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _risk_batch(m: np.ndarray, xs: np.ndarray) -> np.ndarray:
    support = m > 0
    masked = np.where(support[None], xs[:, None, :], -np.inf)  # (batch, i, j)
    top = masked.max(axis=2)
    with np.errstate(invalid="ignore"):
        terms = np.where(support[None], m[None] * np.exp(masked - top[..., None]), 0.0)
    return top + np.log(terms.sum(axis=2))


def risk_sensitive_apply(model: RiskSensitiveModel, x) -> np.ndarray:
    x = as_vector(x, model.n)
    return _risk_batch(model.matrix, x[None])[0]


# ---------------------------------------------------------------------------
# the three-state example with a continuum of actions


def _builtin_batch(xs: np.ndarray) -> np.ndarray:
    x1, x2, x3 = xs[:, 0], xs[:, 1], xs[:, 2]
    out = np.empty_like(xs)
    out[:, 0] = x1 + h(np.minimum(x2, x3) - x1)
    out[:, 1] = x1 - h(x1 - x3)
    out[:, 2] = x3
    return out


def builtin_example_apply(x) -> np.ndarray:
    """Three-state game: MAX partially controls state 1, MIN state 2, state 3 absorbs.

    ``T(x) = [x1 + h(min(x2, x3) - x1), x1 - h(x1 - x3), x3]``.
    """
    x = as_vector(x, 3)
    return _builtin_batch(x[None])[0]


# ---------------------------------------------------------------------------
# operator handles


@dataclass(frozen=True)
class ShapleyOperator:
    """Uniform evaluator for a monotone, additively homogeneous map.

    ``batch`` maps an ``(m, n)`` array to an ``(m, n)`` array row by row.
    ``hyperarc_oracle(J, i, sign)`` optionally answers exactly whether
    ``T_i(alpha 1_J)`` diverges to ``sign * inf`` as ``alpha -> sign * inf``.
    """

    n: int
    kind: str
    batch: BatchFn = field(repr=False)
    hyperarc_oracle: HyperarcOracle | None = field(default=None, repr=False)
    game: GameModel | None = field(default=None, repr=False)

    def __call__(self, x) -> np.ndarray:
        x = as_vector(x, self.n)
        return self.eval_batch(x[None])[0]

    def eval_batch(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != self.n:
            raise DimensionError(f"expected an (m, {self.n}) array, got shape {xs.shape}")
        with np.errstate(over="ignore", invalid="ignore"):
            out = self.batch(xs)
        if np.isnan(out).any():
            raise EvaluationError(f"{self.kind} operator produced NaN")
        return out


def _finite_oracle(game: GameModel) -> HyperarcOracle:
    supports = game.supports

    def oracle(tail: frozenset, state: int, sign: int) -> bool:
        jmask = sum(1 << (j - 1) for j in tail)
        hits = [[bool(s & jmask) for s in row] for row in supports[state - 1]]
        if sign > 0:
            return all(any(row) for row in hits)
        return any(all(row) for row in hits)

    return oracle


def finite_game_operator(game: GameModel) -> ShapleyOperator:
    r, p, _ = game.padded
    return ShapleyOperator(
        game.n, "finite_game", lambda xs: _minmax_batch(r, p, xs),
        hyperarc_oracle=_finite_oracle(game), game=game,
    )


def recession_operator(game: GameModel) -> ShapleyOperator:
    """Closed-form recession map of a finite game (payments dropped)."""
    r, p, valid = game.padded
    r0 = np.where(valid, 0.0, r)
    return ShapleyOperator(
        game.n, "recession-of(finite_game)", lambda xs: _minmax_batch(r0, p, xs),
        hyperarc_oracle=_finite_oracle(game),
    )


def risk_sensitive_operator(model: RiskSensitiveModel) -> ShapleyOperator:
    m = model.matrix
    support = m > 0

    # +inf along alpha 1_J iff J meets the row support; -inf iff the support lies in J
    def oracle(tail: frozenset, state: int, sign: int) -> bool:
        row = {j + 1 for j in np.flatnonzero(support[state - 1])}
        return bool(row & tail) if sign > 0 else row <= tail

    return ShapleyOperator(model.n, "risk_sensitive", lambda xs: _risk_batch(m, xs),
                           hyperarc_oracle=oracle)


def builtin_example_operator() -> ShapleyOperator:
    return ShapleyOperator(3, "builtin_example", _builtin_batch)


def shift_operator(handle: ShapleyOperator, g) -> ShapleyOperator:
    """``x -> g + T(x)``.  Limits along ``alpha 1_J`` are unchanged, so the oracle carries over."""
    g = as_vector(g, handle.n).copy()
    g.setflags(write=False)
    inner = handle.batch
    return ShapleyOperator(
        handle.n, f"shifted({handle.kind})", lambda xs: g + inner(xs),
        hyperarc_oracle=handle.hyperarc_oracle,
        game=handle.game.shifted(g) if handle.game is not None else None,
    )


def recession_numeric(handle: ShapleyOperator, x, alpha: float) -> np.ndarray:
    """Single-scale probe ``T(alpha x) / alpha`` of the recession map."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    x = as_vector(x, handle.n)
    return handle(alpha * x) / alpha


def callable_operator(n: int, fn: Callable[[np.ndarray], np.ndarray], kind: str = "callable") -> ShapleyOperator:
    """Wrap a vector function (no batch support) as a handle, e.g. for testing."""

    def batch(xs):
        return np.array([as_vector(fn(x), n) for x in xs]).reshape(len(xs), n)

    return ShapleyOperator(n, kind, batch)


# ---------------------------------------------------------------------------
# axiom validation


@dataclass
class AxiomReport:
    """Outcome of :func:`validate_axioms`.

    ``violations`` maps each violated property to its first counterexample
    in draw order; ``failed_property`` is the first key.
    """

    passed: bool
    samples: int
    violations: dict = field(default_factory=dict)

    @property
    def failed_property(self) -> str | None:
        return next(iter(self.violations), None)

    @property
    def counterexample(self) -> dict | None:
        return self.violations.get(self.failed_property)

    def summary(self) -> str:
        if self.passed:
            return f"axioms hold on {self.samples} samples"
        return "; ".join(f"{prop} violated: {cx}" for prop, cx in self.violations.items())


def validate_axioms(handle: ShapleyOperator, samples: int = 1000, seed: int = 0,
                    *, tol: float = 1e-9, scale: float = 100.0) -> AxiomReport:
    """Randomized check of monotonicity, additive homogeneity and Hilbert nonexpansiveness.

    Sample ``k`` draws ``x`` uniformly in ``[-scale, scale]^n``, an upper
    vector ``y >= x``, an independent ``z`` and a scalar ``c`` in
    ``[-10, 10]``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n = handle.n
    rng = np.random.default_rng(seed)
    x = rng.uniform(-scale, scale, (samples, n))
    bump = rng.uniform(0.0, scale / 10, (samples, n)) * (rng.random((samples, n)) < 0.7)
    y = x + bump
    z = rng.uniform(-scale, scale, (samples, n))
    c = rng.uniform(-10.0, 10.0, samples)
    try:
        tx, ty, tz = (handle.eval_batch(v) for v in (x, y, z))
        txc = handle.eval_batch(x + c[:, None])
    except EvaluationError as exc:
        return AxiomReport(False, samples, {"evaluation": {"error": str(exc)}})

    with np.errstate(invalid="ignore"):
        mono = ~(np.max(tx - ty, axis=1) <= tol)
        homog = ~(np.max(np.abs(txc - tx - c[:, None]), axis=1) <= tol * (1 + np.abs(c)))
        d_out = tx - tz
        d_in = x - z
        nonexp = ~((d_out.max(axis=1) - d_out.min(axis=1)) <= (d_in.max(axis=1) - d_in.min(axis=1)) + tol)

    violations = {}
    if mono.any():
        k = int(np.argmax(mono))
        violations["monotonicity"] = {"x": x[k].tolist(), "y": y[k].tolist(),
                                      "T(x)": tx[k].tolist(), "T(y)": ty[k].tolist()}
    if homog.any():
        k = int(np.argmax(homog))
        violations["additive homogeneity"] = {"x": x[k].tolist(), "c": float(c[k]),
                                              "T(x+c1)-T(x)-c1": (txc[k] - tx[k] - c[k]).tolist()}
    if nonexp.any():
        k = int(np.argmax(nonexp))
        violations["Hilbert nonexpansiveness"] = {"x": x[k].tolist(), "y": z[k].tolist()}
    return AxiomReport(not violations, samples, violations)
