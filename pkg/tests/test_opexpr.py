import math
import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_game
from ergodix.errors import EvaluationError, ModelError
from ergodix.hypergraph import Hyperarc
from ergodix.model import RiskSensitiveModel, builtin_example_apply, risk_sensitive_apply, shapley_apply
from ergodix.opexpr import (
    AxiomViolation,
    Const,
    Dot,
    Exp,
    HFun,
    Log,
    Max,
    Min,
    OperatorSpec,
    ParseError,
    Scale,
    Sum,
    Var,
    eval_spec,
    game_expressions,
    game_spec,
    parse_expression,
    parse_operator,
    pretty_print,
    validate_spec,
)

BUILTIN_TEXT = """
# three-state example
x1 + h(min(x2, x3) - x1)
x1 - h(x1 - x3)
x3
"""


def test_sum_of_var_and_const():
    assert parse_expression("x1 + 2", 1) == Sum((Var(1), Const(2.0)))


def test_builtin_first_coordinate_structure():
    node = parse_expression("x1 + h(min(x2, x3) - x1)", 3)
    assert node == Sum((Var(1), HFun(Sum((Min((Var(2), Var(3))), Scale(-1.0, Var(1)))))))


def test_risk_row_structure():
    node = parse_expression("log(1*exp(x1) + 2*exp(x2))", 2)
    assert node == Log(Sum((Scale(1.0, Exp(Var(1))), Scale(2.0, Exp(Var(2))))))
    spec = OperatorSpec(2, (node, node))
    expected = risk_sensitive_apply(RiskSensitiveModel([[1, 2], [1, 2]]), [0.3, -0.4])
    assert np.allclose(eval_spec(spec, [0.3, -0.4]), expected, atol=1e-14)


def test_precedence():
    # unary minus binds tighter than '*', which binds tighter than '+'
    assert parse_expression("-2*x1 + 3", 1) == Sum((Scale(-2.0, Var(1)), Const(3.0)))
    assert parse_expression("2*(x1 + 3)", 1) == Scale(2.0, Sum((Var(1), Const(3.0))))
    assert parse_expression("x1*2", 1) == Scale(2.0, Var(1))


def test_whitespace_is_insignificant():
    assert parse_expression("max(x1,x2)", 2) == parse_expression("  max ( x1 ,   x2 ) ", 2)


def test_number_formats():
    assert parse_expression("1.5e-3", 1) == Const(1.5e-3)
    assert parse_expression(".5", 1) == Const(0.5)
    assert parse_expression("3.", 1) == Const(3.0)


def test_constant_product_is_allowed():
    assert eval_spec(OperatorSpec(1, (parse_expression("(1 + 1)*x1", 1),)), [4.0])[0] == 8.0


@pytest.mark.parametrize("text, column, message", [
    ("x1 + * 2", 6, "expected a number"),
    ("foo(x1)", 1, "unknown identifier 'foo'"),
    ("x0 + 1", 1, "unknown identifier 'x0'"),
    ("x1 + x4", 6, "out of range"),
    ("log(x1, x2)", 1, "takes 1 argument"),
    ("min(x1)", 1, "at least 2 arguments"),
    ("min(x1, x2", 11, "expected ')'"),
    ("x1 $ x2", 4, "unexpected character"),
    ("x1 * x2", 4, "product of two non-constant"),
    ("x1 x2", 4, "unexpected 'x2'"),
    ("", 1, "found end of input"),
])
def test_parse_errors_carry_location(text, column, message):
    with pytest.raises(ParseError, match=re.escape(message)) as info:
        parse_expression(text, 3, line=2)
    assert (info.value.line, info.value.column) == (2, column)


def test_parse_operator_reports_physical_line():
    with pytest.raises(ParseError) as info:
        parse_operator("x1\n\n# note\nmax(x1, x9)\nx3", 3)
    assert info.value.line == 4


def test_coordinate_count_checked():
    with pytest.raises(ModelError, match="expected 3 coordinate"):
        parse_operator(["x1", "x2"], 3)


def test_declared_arcs_checked():
    with pytest.raises(ModelError, match="outside 1..1"):
        parse_operator(["x1"], hyperarcs_plus=[Hyperarc([2], 1)])
    with pytest.raises(ModelError, match="single head"):
        parse_operator(["x1", "x2"], hyperarcs_minus=[Hyperarc([1], [1, 2])])


def test_dot_row_must_be_stochastic():
    with pytest.raises(ModelError, match="sums to"):
        OperatorSpec(2, (Dot((0.5, 0.4)), Var(2)))


def test_eval_identity():
    assert eval_spec(parse_operator("x1"), [5.0]).tolist() == [5.0]


def test_builtin_spec_values():
    spec = parse_operator(BUILTIN_TEXT)
    assert eval_spec(spec, [0, 0, 0]).tolist() == [0.0, 0.0, 0.0]
    assert eval_spec(spec, [0, 7, 7])[0] == pytest.approx(7.0)
    rng = np.random.default_rng(1)
    for x in rng.uniform(-20, 20, (200, 3)):
        assert np.allclose(eval_spec(spec, x), builtin_example_apply(x), atol=1e-12)


def test_log_domain_error_names_coordinate():
    spec = parse_operator(["x1", "log(x1 - x2)"])
    with pytest.raises(EvaluationError, match="coordinate 2.*log of nonpositive"):
        eval_spec(spec, [0.0, 1.0])


def test_log_sum_exp_is_overflow_safe():
    spec = parse_operator(["log(exp(x1) + exp(x2))", "x2"])
    assert eval_spec(spec, [1000.0, 1000.0])[0] == pytest.approx(1000.0 + math.log(2))


def test_validate_difference_fails_monotonicity():
    with pytest.raises(AxiomViolation) as info:
        validate_spec(parse_operator(["x1 - x2", "x2"]), 200, seed=0)
    assert "monotonicity" in info.value.report.violations


def test_validate_max_passes():
    assert validate_spec(parse_operator(["max(x1, x2)", "max(x1, x2)"]), 1000).passed


def test_validate_builtin_spec_passes():
    assert validate_spec(parse_operator(BUILTIN_TEXT), 1000).passed


def test_game_expressions_match_shapley_apply():
    rng = np.random.default_rng(42)
    for _ in range(30):
        game = random_game(int(rng.integers(1, 6)), rng, ragged=True)
        text_spec = parse_operator(game_expressions(game))
        dot_spec = game_spec(game)
        for x in rng.uniform(-10, 10, (20, game.n)):
            ref = shapley_apply(game, x)
            assert np.max(np.abs(eval_spec(text_spec, x) - ref)) <= 1e-12
            assert np.max(np.abs(eval_spec(dot_spec, x) - ref)) <= 1e-12


def test_dot_prints_as_equivalent_sum():
    node = Sum((Const(1.0), Dot((0.25, 0.0, 0.75))))
    back = parse_expression(pretty_print(node), 3)
    spec_a, spec_b = OperatorSpec(3, (node,) * 3), OperatorSpec(3, (back,) * 3)
    x = [2.0, -5.0, 4.0]
    assert eval_spec(spec_a, x).tolist() == eval_spec(spec_b, x).tolist()


# -- round trip -----------------------------------------------------------------

N_VARS = 4
finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def _asts():
    leaves = st.one_of(st.builds(Const, finite), st.builds(Var, st.integers(1, N_VARS)))

    def extend(children):
        several = st.lists(children, min_size=2, max_size=4).map(tuple)
        return st.one_of(
            st.builds(Sum, several),
            st.builds(Scale, finite, children),
            st.builds(Min, several),
            st.builds(Max, several),
            st.builds(Log, children),
            st.builds(Exp, children),
            st.builds(HFun, children),
        )

    return st.recursive(leaves, extend, max_leaves=12)


@given(_asts())
@settings(max_examples=1000, deadline=None)
def test_print_parse_round_trip(node):
    assert parse_expression(pretty_print(node), N_VARS) == node
