"""Ergodicity certificates and ergodic eigenpairs for Shapley operators of stochastic games."""

__version__ = "0.1.0"

from .ergodicity import (  # noqa: E402
    ConjugatePair,
    ErgodicityCertificate,
    HypergraphPair,
    ProbeSchedule,
    build_pair_finite,
    build_pair_probed,
    certify,
    find_nontrivial_conjugate,
    recession_fixed_point_check,
)
from .hypergraph import Hyperarc, Hypergraph, insert_minimal, is_invariant, reach  # noqa: E402
from .model import (  # noqa: E402
    GameModel,
    RiskSensitiveModel,
    ShapleyOperator,
    builtin_example_operator,
    finite_game_operator,
    hilbert_seminorm,
    risk_sensitive_operator,
    shift_operator,
    validate_axioms,
)
from .opexpr import OperatorSpec, eval_spec, expression_operator, parse_operator  # noqa: E402
from .solver import extract_policies, simulate_stationary, slice_check, solve_ergodic, value_iteration  # noqa: E402
