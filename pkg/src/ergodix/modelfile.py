"""Loading model files (JSON) into operator handles.

Top-level object: ``{"kind": ..., ...}`` with kind one of ``finite_game``,
``risk_sensitive``, ``expression`` or ``builtin_example``.  Every kind accepts
an optional ``"g"`` vector added to the operator.  States are 1-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ModelError
from .hypergraph import Hyperarc
from .model import (
    GameModel,
    MaxAction,
    MinAction,
    RiskSensitiveModel,
    ShapleyOperator,
    as_vector,
    builtin_example_operator,
    finite_game_operator,
    risk_sensitive_operator,
    shift_operator,
    stochastic_row,
)
from .opexpr import OperatorSpec, expression_operator, parse_operator

KINDS = ("finite_game", "risk_sensitive", "expression", "builtin_example")


@dataclass
class LoadedModel:
    kind: str
    n: int
    base: ShapleyOperator  # without g
    g: list[float] | None = None
    game: GameModel | None = None
    spec: OperatorSpec | None = None

    def operator(self, g=None) -> ShapleyOperator:
        g = self.g if g is None else g
        return self.base if g is None else shift_operator(self.base, g)

    def shifted_game(self, g=None) -> GameModel | None:
        g = self.g if g is None else g
        if self.game is None or g is None:
            return self.game
        return self.game.shifted(g)


def _get(obj: dict, key: str, where: str, kind=None):
    if not isinstance(obj, dict):
        raise ModelError(f"{where}: expected an object")
    if key not in obj:
        raise ModelError(f"{where}: missing field {key!r}")
    val = obj[key]
    if kind is not None and (not isinstance(val, kind) or isinstance(val, bool)):
        raise ModelError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}")
    return val


def _number(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ModelError(f"{where}: expected a number")
    return float(x)


def _vector(xs, n: int | None, where: str) -> list[float]:
    if not isinstance(xs, list):
        raise ModelError(f"{where}: expected a list of numbers")
    out = [_number(x, f"{where}[{k}]") for k, x in enumerate(xs)]
    if n is not None and len(out) != n:
        raise ModelError(f"{where}: expected {n} entries, got {len(out)}")
    return out


def _game(doc: dict, renormalize: bool) -> GameModel:
    n = _get(doc, "n", "model", int)
    states = _get(doc, "states", "model", list)
    if n < 1 or len(states) != n:
        raise ModelError(f"model.states: expected {n} states, got {len(states)}")
    out = []
    for i, st in enumerate(states):
        where = f"states[{i}] (state {i + 1})"
        acts = []
        for a, act in enumerate(_get(st, "min_actions", where, list)):
            aw = f"{where}.min_actions[{a}]"
            aname = str(act.get("name", f"a{a + 1}")) if isinstance(act, dict) else ""
            resps = []
            for b, resp in enumerate(_get(act, "max_actions", aw, list)):
                bw = f"{aw}.max_actions[{b}]"
                bname = str(resp.get("name", f"b{b + 1}")) if isinstance(resp, dict) else ""
                pay = _number(_get(resp, "payment", bw), f"{bw}.payment")
                row = _vector(_get(resp, "transition", bw), n, f"{bw}.transition")
                resps.append(MaxAction(bname, pay, stochastic_row(row, renormalize)))
            acts.append(MinAction(aname, tuple(resps)))
        out.append(tuple(acts))
    return GameModel(tuple(out))


def _arcs(items, n: int, where: str) -> tuple[Hyperarc, ...]:
    if not isinstance(items, list):
        raise ModelError(f"{where}: expected a list")
    arcs = []
    for k, item in enumerate(items):
        w = f"{where}[{k}]"
        tail = _get(item, "tail", w, list)
        head = _get(item, "head", w, int)
        if not all(isinstance(t, int) and not isinstance(t, bool) for t in tail):
            raise ModelError(f"{w}.tail: expected a list of state numbers")
        if any(not 1 <= s <= n for s in list(tail) + [head]):
            raise ModelError(f"{w}: states must lie in 1..{n}")
        arcs.append(Hyperarc(tail, head))
    return tuple(arcs)


def load_document(doc: dict, *, renormalize: bool = False) -> LoadedModel:
    kind = _get(doc, "kind", "model", str)
    if kind not in KINDS:
        raise ModelError(f"model.kind: unknown kind {kind!r} (expected one of {', '.join(KINDS)})")
    if kind == "finite_game":
        game = _game(doc, renormalize)
        model = LoadedModel(kind, game.n, finite_game_operator(game), game=game)
    elif kind == "risk_sensitive":
        rows = _get(doc, "matrix", "model", list)
        matrix = [_vector(r, len(rows), f"matrix[{k}]") for k, r in enumerate(rows)]
        rs = RiskSensitiveModel(matrix)
        model = LoadedModel(kind, rs.n, risk_sensitive_operator(rs))
    elif kind == "expression":
        n = _get(doc, "n", "model", int)
        coords = _get(doc, "coords", "model", list)
        if not all(isinstance(c, str) for c in coords):
            raise ModelError("model.coords: expected a list of strings")
        spec = parse_operator(
            coords, n,
            hyperarcs_plus=_arcs(doc.get("hyperarcs_plus", []), n, "hyperarcs_plus"),
            hyperarcs_minus=_arcs(doc.get("hyperarcs_minus", []), n, "hyperarcs_minus"),
        )
        model = LoadedModel(kind, n, expression_operator(spec), spec=spec)
    else:
        model = LoadedModel(kind, 3, builtin_example_operator())
    if "g" in doc:
        model.g = _vector(doc["g"], model.n, "g")
    return model


def load_model(path: str | Path, *, renormalize: bool = False) -> LoadedModel:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return load_document(doc, renormalize=renormalize)


def parse_g(text: str, n: int) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise ModelError(f"--g: cannot parse {text!r} as comma-separated numbers") from None
    return as_vector(vals, n).tolist()
