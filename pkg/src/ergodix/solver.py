"""Value iteration, ergodic eigenpairs, slice certificates and stationary strategies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericFailure
from .model import GameModel, ShapleyOperator, as_vector, hilbert_seminorm

OVERFLOW_GUARD = 1e15


@dataclass
class MeanPayoffEstimate:
    per_state: np.ndarray  # v^k / k
    horizon: int
    values: np.ndarray = field(repr=False)  # v^k


@dataclass
class Eigenpair:
    """Approximate solution of ``T(u) = eigenvalue * 1 + u`` with ``mean(u) = 0``."""

    eigenvalue: float
    bias: np.ndarray
    residual: float
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list, repr=False)


@dataclass
class SliceCertificate:
    x: np.ndarray
    alpha: float
    beta: float
    in_sub: bool
    in_super: bool

    def report(self) -> str:
        lines = []
        if self.in_sub:
            lines.append(f"T(x) >= {self.alpha!r} + x: liminf T^k(0)/k >= {self.alpha!r} in every state")
        else:
            lines.append(f"x is not in the sub-eigenspace for alpha = {self.alpha!r}")
        if self.in_super:
            lines.append(f"T(x) <= {self.beta!r} + x: limsup T^k(0)/k <= {self.beta!r} in every state")
        else:
            lines.append(f"x is not in the super-eigenspace for beta = {self.beta!r}")
        return "\n".join(lines)


@dataclass(frozen=True)
class StationaryStrategyPair:
    """MIN picks ``min_choice[i]`` at state ``i``; MAX answers action ``a`` with ``max_response[i][a]``.

    Indices are 0-based positions in the game's action lists.
    """

    min_choice: tuple[int, ...]
    max_response: tuple[tuple[int, ...], ...]
    epsilon: float = 0.0

    def describe(self, game: GameModel) -> list[str]:
        out = []
        for i, acts in enumerate(game.states):
            a = self.min_choice[i]
            b = self.max_response[i][a]
            out.append(f"state {i + 1}: MIN {acts[a].name}, MAX {acts[a].responses[b].name}")
        return out


@dataclass
class SimulationResult:
    mean: np.ndarray  # average payoff per stage, per starting state
    stderr: np.ndarray
    horizon: int
    trials: int


def value_iteration(handle: ShapleyOperator, k: int) -> MeanPayoffEstimate:
    """``v^k = T^k(0)``, returned together with ``v^k / k``."""
    if k < 1:
        raise ValueError("horizon must be >= 1")
    v = np.zeros(handle.n)
    for step in range(1, k + 1):
        v = handle(v)
        if not np.all(np.abs(v) <= OVERFLOW_GUARD):
            raise NumericFailure(f"value iteration left [-1e15, 1e15] at step {step}")
    return MeanPayoffEstimate(v / k, k, v)


def solve_ergodic(
    handle: ShapleyOperator,
    tol: float = 1e-10,
    max_iter: int = 1_000_000,
    *,
    damping: float = 0.5,
    stall_window: int | None = 10_000,
    record: bool = False,
) -> Eigenpair:
    """Damped, normalized fixed-point iteration for the ergodic equation.

    ``x <- (1 - damping) x + damping (T(x) - mean(T(x)))`` from ``x = 0``;
    the eigenvalue estimate is ``mean(T(x) - x)`` and the residual
    ``max |T(x) - x - eigenvalue|``.  Gives up (``converged=False``) after
    ``max_iter`` evaluations, or once the best residual has not improved
    for ``stall_window`` evaluations.  With ``record`` the Hilbert seminorm
    of ``T(x) - x`` is kept per iteration; it never increases.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    x = np.zeros(handle.n)
    best = (math.inf, x, 0.0)
    best_at = 0
    history = []
    it = 0
    while it < max_iter:
        y = handle(x)
        it += 1
        d = y - x
        if not np.all(np.isfinite(d)):
            raise NumericFailure(f"non-finite values at iteration {it}")
        lam = float(d.mean())
        res = float(np.max(np.abs(d - lam)))
        if record:
            history.append(hilbert_seminorm(d))
        if res < best[0]:
            best = (res, x, lam)
            best_at = it
        if res <= tol:
            break
        if stall_window is not None and it - best_at >= stall_window:
            break
        x = (1 - damping) * x + damping * (y - y.mean())
    res, u, lam = best
    return Eigenpair(lam, u, res, it, res <= tol, history)


def slice_check(handle: ShapleyOperator, x, alpha: float, beta: float) -> SliceCertificate:
    """Membership of ``x`` in ``{T(x) >= alpha + x}`` and ``{T(x) <= beta + x}`` (no tolerance)."""
    x = as_vector(x, handle.n)
    y = handle(x)
    return SliceCertificate(x, alpha, beta, bool(np.all(y >= alpha + x)), bool(np.all(y <= beta + x)))


def extract_policies(game: GameModel, u, epsilon: float = 0.0) -> StationaryStrategyPair:
    """Lowest-index actions attaining the min-max in ``r + P u`` within ``epsilon``."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    u = as_vector(u, game.n)
    choice, responses = [], []
    for acts in game.states:
        inner = []
        best_b = []
        for act in acts:
            vals = [resp.payment + float(np.dot(resp.transition, u)) for resp in act.responses]
            top = max(vals)
            inner.append(top)
            best_b.append(next(b for b, v in enumerate(vals) if v >= top - epsilon))
        low = min(inner)
        choice.append(next(a for a, v in enumerate(inner) if v <= low + epsilon))
        responses.append(tuple(best_b))
    return StationaryStrategyPair(tuple(choice), tuple(responses), epsilon)


def simulate_stationary(game: GameModel, strategies: StationaryStrategyPair, horizon: int,
                        trials: int, seed: int = 0) -> SimulationResult:
    """Monte Carlo estimate of the ``horizon``-stage payoff per stage under fixed strategies."""
    if horizon < 1 or trials < 1:
        raise ValueError("horizon and trials must be >= 1")
    n = game.n
    pay = np.empty(n)
    cum = np.empty((n, n))
    for i, acts in enumerate(game.states):
        a = strategies.min_choice[i]
        resp = acts[a].responses[strategies.max_response[i][a]]
        pay[i] = resp.payment
        cum[i] = np.cumsum(resp.transition)
    cum[:, -1] = 1.0
    streams = np.random.SeedSequence(seed).spawn(n)
    mean = np.empty(n)
    stderr = np.empty(n)
    for start in range(n):
        rng = np.random.default_rng(streams[start])
        state = np.full(trials, start)
        total = np.zeros(trials)
        for _ in range(horizon):
            total += pay[state]
            draw = rng.random(trials)
            state = (draw[:, None] >= cum[state]).sum(axis=1)
        per_stage = total / horizon
        mean[start] = per_stage.mean()
        stderr[start] = per_stage.std(ddof=1) / math.sqrt(trials) if trials > 1 else 0.0
    return SimulationResult(mean, stderr, horizon, trials)
