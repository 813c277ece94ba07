"""User-defined Shapley operators written as one expression per coordinate.

Grammar (whitespace is insignificant)::

    expr    := term (('+'|'-') term)*
    term    := factor ('*' factor)*
    factor  := NUMBER | VAR | '(' expr ')' | '-' factor | call
    call    := ('min'|'max') '(' expr (',' expr)+ ')' | ('log'|'exp'|'h') '(' expr ')'
    VAR     := 'x' [1-9][0-9]*

Products need at least one constant operand, so every expression is built
from sums, scalings, min, max, log, exp and the function ``h``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import EvaluationError, ModelError
from .hypergraph import Hyperarc
from .model import (
    ROW_SUM_TOL,
    AxiomReport,
    GameModel,
    ShapleyOperator,
    as_vector,
    h,
    validate_axioms,
)


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Sum:
    terms: tuple


@dataclass(frozen=True)
class Scale:
    coef: float
    arg: "Node"


@dataclass(frozen=True)
class Min:
    args: tuple


@dataclass(frozen=True)
class Max:
    args: tuple


@dataclass(frozen=True)
class Log:
    arg: "Node"


@dataclass(frozen=True)
class Exp:
    arg: "Node"


@dataclass(frozen=True)
class HFun:
    arg: "Node"


@dataclass(frozen=True)
class Dot:
    """``sum_j row[j] * x_{j+1}`` for a probability row over all states."""

    row: tuple


Node = Union[Const, Var, Sum, Scale, Min, Max, Log, Exp, HFun, Dot]

_CALLS = {"min": Min, "max": Max, "log": Log, "exp": Exp, "h": HFun}


class ParseError(ModelError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class AxiomViolation(ModelError):
    def __init__(self, report: AxiomReport):
        super().__init__(report.summary())
        self.report = report


@dataclass(frozen=True)
class OperatorSpec:
    n: int
    coords: tuple
    hyperarcs_plus: tuple[Hyperarc, ...] = ()
    hyperarcs_minus: tuple[Hyperarc, ...] = ()

    def __post_init__(self):
        if len(self.coords) != self.n:
            raise ModelError(f"expected {self.n} coordinate expressions, got {len(self.coords)}")
        for k, node in enumerate(self.coords, start=1):
            try:
                _check(node, self.n)
            except ModelError as exc:
                raise ModelError(f"coordinate {k}: {exc}") from None
        for d in self.hyperarcs_plus + self.hyperarcs_minus:
            if any(not 1 <= v <= self.n for v in d.tail | d.head):
                raise ModelError(f"declared hyperarc {d!r} references states outside 1..{self.n}")
            if len(d.head) != 1:
                raise ModelError(f"declared hyperarc {d!r} must have a single head state")


def _check(node: Node, n: int) -> None:
    if isinstance(node, Var):
        if not 1 <= node.index <= n:
            raise ModelError(f"variable x{node.index} outside x1..x{n}")
    elif isinstance(node, Const):
        if not math.isfinite(node.value):
            raise ModelError("constants must be finite")
    elif isinstance(node, Scale):
        if not math.isfinite(node.coef):
            raise ModelError("scale factors must be finite")
        _check(node.arg, n)
    elif isinstance(node, (Sum, Min, Max)):
        items = node.terms if isinstance(node, Sum) else node.args
        if not items:
            raise ModelError(f"{type(node).__name__} needs at least one operand")
        for a in items:
            _check(a, n)
    elif isinstance(node, (Log, Exp, HFun)):
        _check(node.arg, n)
    elif isinstance(node, Dot):
        row = node.row
        if len(row) != n or any(not math.isfinite(p) or p < 0 for p in row):
            raise ModelError("dot row must hold n nonnegative entries")
        if abs(math.fsum(row) - 1.0) > ROW_SUM_TOL:
            raise ModelError(f"dot row sums to {math.fsum(row)!r}, not 1")
    else:
        raise ModelError(f"unknown node {node!r}")


# ---------------------------------------------------------------------------
# tokenizer and parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*(),]))"
)
_VAR = re.compile(r"x([1-9][0-9]*)")


@dataclass
class _Tok:
    kind: str  # num | name | op | end
    text: str
    col: int


def _tokenize(src: str, line: int) -> list[_Tok]:
    toks = []
    pos = 0
    while True:
        while pos < len(src) and src[pos].isspace():
            pos += 1
        if pos >= len(src):
            break
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {src[pos]!r}", line, pos + 1)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    toks.append(_Tok("end", "", len(src) + 1))
    return toks


class _Parser:
    def __init__(self, src: str, n: int, line: int):
        self.toks = _tokenize(src, line)
        self.pos = 0
        self.n = n
        self.line = line

    def error(self, msg: str, tok: _Tok | None = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(msg, self.line, tok.col)

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def advance(self) -> _Tok:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            found = "end of input" if tok.kind == "end" else repr(tok.text)
            raise self.error(f"expected {text!r}, found {found}")
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.peek().kind != "end":
            raise self.error(f"unexpected {self.peek().text!r}")
        return node

    def expr(self) -> Node:
        terms = [self.term()]
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            t = self.term()
            terms.append(t if op == "+" else _negate(t))
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def term(self) -> Node:
        node = self.factor()
        while self.peek().kind == "op" and self.peek().text == "*":
            star = self.advance()
            node = _product(node, self.factor(), lambda: self.error(
                "product of two non-constant expressions", star))
        return node

    def factor(self) -> Node:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return Const(float(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return _negate(self.factor())
        if tok.kind == "name":
            self.advance()
            m = _VAR.fullmatch(tok.text)
            if m:
                k = int(m.group(1))
                if k > self.n:
                    raise self.error(f"variable {tok.text} out of range (n = {self.n})", tok)
                return Var(k)
            if tok.text not in _CALLS:
                raise self.error(f"unknown identifier {tok.text!r}", tok)
            return self.call(tok)
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise self.error(f"expected a number, variable, call or '(', found {found}")

    def call(self, name: _Tok) -> Node:
        self.expect("(")
        args = [self.expr()]
        while self.peek().kind == "op" and self.peek().text == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        cls = _CALLS[name.text]
        if cls in (Min, Max):
            if len(args) < 2:
                raise self.error(f"{name.text} takes at least 2 arguments, got {len(args)}", name)
            return cls(tuple(args))
        if len(args) != 1:
            raise self.error(f"{name.text} takes 1 argument, got {len(args)}", name)
        return cls(args[0])


def _negate(node: Node) -> Node:
    if isinstance(node, Const):
        return Const(-node.value)
    return Scale(-1.0, node)


def _product(left: Node, right: Node, fail) -> Node:
    if isinstance(left, Const):
        return Scale(left.value, right)
    if isinstance(right, Const):
        return Scale(right.value, left)
    if is_constant(left):
        return Scale(_constant_value(left), right)
    if is_constant(right):
        return Scale(_constant_value(right), left)
    raise fail()


def is_constant(node: Node) -> bool:
    if isinstance(node, Var) or isinstance(node, Dot):
        return False
    if isinstance(node, Const):
        return True
    if isinstance(node, Sum):
        return all(is_constant(t) for t in node.terms)
    if isinstance(node, (Min, Max)):
        return all(is_constant(t) for t in node.args)
    return is_constant(node.arg)


def _constant_value(node: Node) -> float:
    return float(_eval(node, np.zeros((1, 0)))[0])


def parse_expression(text: str, n: int, line: int = 1) -> Node:
    return _Parser(text, n, line).parse()


def parse_operator(
    text: str | Sequence[str],
    n: int | None = None,
    *,
    hyperarcs_plus: Iterable[Hyperarc] = (),
    hyperarcs_minus: Iterable[Hyperarc] = (),
) -> OperatorSpec:
    """Parse one coordinate expression per line (or per list item).

    In a single string, blank lines and lines starting with ``#`` are
    skipped; error positions refer to the physical line.  ``n`` defaults to
    the number of coordinates.
    """
    if isinstance(text, str):
        lines = [(k, ln) for k, ln in enumerate(text.splitlines(), start=1)
                 if ln.strip() and not ln.lstrip().startswith("#")]
    else:
        lines = list(enumerate(text, start=1))
    if n is None:
        n = len(lines)
    if len(lines) != n:
        raise ModelError(f"expected {n} coordinate expressions, got {len(lines)}")
    coords = tuple(parse_expression(src, n, line) for line, src in lines)
    return OperatorSpec(n, coords, tuple(hyperarcs_plus), tuple(hyperarcs_minus))


# ---------------------------------------------------------------------------
# printer


def _num(v: float) -> str:
    if not math.isfinite(v):
        raise ModelError(f"cannot print non-finite constant {v!r}")
    return repr(float(v))


def _atom(node: Node) -> str:
    s = pretty_print(node)
    return s if isinstance(node, (Var, Const, Min, Max, Log, Exp, HFun)) else f"({s})"


def pretty_print(node: Node) -> str:
    """Render ``node`` so that parsing the text gives back the same tree.

    ``Dot`` nodes print as the equivalent weighted sum, which parses to an
    equal-valued but structurally different tree.
    """
    if isinstance(node, Const):
        return _num(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Sum):
        return " + ".join(f"({pretty_print(t)})" if isinstance(t, Sum) else pretty_print(t)
                          for t in node.terms)
    if isinstance(node, Scale):
        return f"{_num(node.coef)}*{_atom(node.arg)}"
    if isinstance(node, (Min, Max)):
        name = "min" if isinstance(node, Min) else "max"
        return f"{name}({', '.join(pretty_print(a) for a in node.args)})"
    if isinstance(node, (Log, Exp, HFun)):
        name = {Log: "log", Exp: "exp", HFun: "h"}[type(node)]
        return f"{name}({pretty_print(node.arg)})"
    if isinstance(node, Dot):
        parts = [f"{_num(p)}*x{j}" for j, p in enumerate(node.row, start=1) if p != 0]
        return f"({' + '.join(parts)})"
    raise ModelError(f"unknown node {node!r}")


# ---------------------------------------------------------------------------
# evaluation (vectorized over the rows of xs)


def _eval(node: Node, xs: np.ndarray) -> np.ndarray:
    m = xs.shape[0]
    if isinstance(node, Const):
        return np.full(m, node.value)
    if isinstance(node, Var):
        return xs[:, node.index - 1]
    if isinstance(node, Sum):
        out = _eval(node.terms[0], xs).copy()
        for t in node.terms[1:]:
            out += _eval(t, xs)
        return out
    if isinstance(node, Scale):
        return node.coef * _eval(node.arg, xs)
    if isinstance(node, Min):
        return np.minimum.reduce([_eval(a, xs) for a in node.args])
    if isinstance(node, Max):
        return np.maximum.reduce([_eval(a, xs) for a in node.args])
    if isinstance(node, Log):
        return _eval_log(node.arg, xs)
    if isinstance(node, Exp):
        return np.exp(_eval(node.arg, xs))
    if isinstance(node, HFun):
        return h(_eval(node.arg, xs))
    if isinstance(node, Dot):
        return xs @ np.asarray(node.row)
    raise ModelError(f"unknown node {node!r}")


def _log_form(node: Node):
    """Return a function computing ``log(node)`` stably, or None."""
    if isinstance(node, Exp):
        return lambda xs: _eval(node.arg, xs)
    if isinstance(node, Const) and node.value > 0:
        return lambda xs: np.full(xs.shape[0], math.log(node.value))
    if isinstance(node, Scale) and node.coef > 0:
        inner = _log_form(node.arg)
        if inner is not None:
            return lambda xs: math.log(node.coef) + inner(xs)
    if isinstance(node, Sum):
        parts = [_log_form(t) for t in node.terms]
        if all(p is not None for p in parts):
            def logsumexp(xs):
                vals = np.stack([p(xs) for p in parts])
                top = vals.max(axis=0)
                safe = np.where(np.isfinite(top), top, 0.0)
                return safe + np.log(np.exp(vals - safe).sum(axis=0))
            return logsumexp
    return None


def _eval_log(arg: Node, xs: np.ndarray) -> np.ndarray:
    stable = _log_form(arg)
    if stable is not None:
        return stable(xs)
    val = _eval(arg, xs)
    bad = ~(val > 0)
    if bad.any():
        raise EvaluationError(f"log of nonpositive value {val[bad][0]!r}")
    return np.log(val)


def spec_batch(spec: OperatorSpec, xs: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    out = np.empty_like(xs)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k, node in enumerate(spec.coords):
            try:
                col = _eval(node, xs)
            except EvaluationError as exc:
                raise EvaluationError(f"coordinate {k + 1}: {exc}") from None
            if np.isnan(col).any():
                raise EvaluationError(f"coordinate {k + 1}: evaluation produced NaN")
            out[:, k] = col
    return out


def eval_spec(spec: OperatorSpec, x) -> np.ndarray:
    x = as_vector(x, spec.n)
    return spec_batch(spec, x[None])[0]


def expression_operator(spec: OperatorSpec) -> ShapleyOperator:
    return ShapleyOperator(spec.n, "expression", lambda xs: spec_batch(spec, xs))


def validate_spec(spec: OperatorSpec, samples: int = 1000, seed: int = 0) -> AxiomReport:
    """Check the Shapley axioms by sampling; raise :class:`AxiomViolation` on failure."""
    report = validate_axioms(expression_operator(spec), samples, seed)
    if not report.passed:
        raise AxiomViolation(report)
    return report


# ---------------------------------------------------------------------------
# finite games as expressions


def game_expressions(game: GameModel) -> list[str]:
    """Text of ``min_a max_b (r + P x)`` for each state of ``game``."""
    out = []
    for acts in game.states:
        mins = []
        for act in acts:
            maxes = [_affine(resp.payment, resp.transition) for resp in act.responses]
            mins.append(maxes[0] if len(maxes) == 1 else f"max({', '.join(maxes)})")
        out.append(mins[0] if len(mins) == 1 else f"min({', '.join(mins)})")
    return out


def game_spec(game: GameModel) -> OperatorSpec:
    """Same operator as ``game`` built directly from ``Dot`` nodes."""
    coords = []
    for acts in game.states:
        mins = []
        for act in acts:
            maxes = [Sum((Const(resp.payment), Dot(resp.transition))) for resp in act.responses]
            mins.append(maxes[0] if len(maxes) == 1 else Max(tuple(maxes)))
        coords.append(mins[0] if len(mins) == 1 else Min(tuple(mins)))
    return OperatorSpec(game.n, tuple(coords))


def _affine(r: float, p: Sequence[float]) -> str:
    parts = [_num(r)] + [f"{_num(q)}*x{j}" for j, q in enumerate(p, start=1) if q != 0]
    return " + ".join(parts)
