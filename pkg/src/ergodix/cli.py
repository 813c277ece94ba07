"""Command line interface.

Exit codes: 0 positive result (valid, ergodic, converged), 1 negative result
(non-ergodic, not converged), 2 error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ergodicity import build_pair_finite, build_pair_probed, certify
from .errors import ErgodixError
from .hypergraph import to_dot
from .model import validate_axioms
from .modelfile import LoadedModel, load_model, parse_g
from .opexpr import validate_spec
from .solver import extract_policies, simulate_stationary, solve_ergodic, value_iteration

EXIT_OK, EXIT_NEGATIVE, EXIT_ERROR = 0, 1, 2


def _emit(args, payload: dict, text: str) -> None:
    if args.machine:
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        print(text)


def _fmt(v) -> str:
    return "[" + ", ".join(f"{x:.6f}" for x in np.asarray(v, dtype=float)) + "]"


def _load(args) -> LoadedModel:
    model = load_model(args.path, renormalize=getattr(args, "renormalize", False))
    if getattr(args, "g", None):
        model.g = parse_g(args.g, model.n)
    return model


def _pair(model: LoadedModel):
    if model.game is not None:
        return build_pair_finite(model.game)
    declared = model.spec
    return build_pair_probed(
        model.base,
        declared_plus=declared.hyperarcs_plus if declared else (),
        declared_minus=declared.hyperarcs_minus if declared else (),
    )


def _write_dot(pair, outdir: str) -> list[str]:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, g in (("hplus", pair.hplus), ("hminus", pair.hminus)):
        p = out / f"{name}.dot"
        p.write_text(to_dot(g, name), encoding="utf-8")
        paths.append(str(p))
    return paths


def _arcs_payload(g) -> list[dict]:
    return [{"tail": sorted(d.tail), "head": sorted(d.head)[0]} for d in g.sorted_arcs()]


def cmd_validate(args) -> int:
    try:
        model = _load(args)
    except ErgodixError as exc:
        _emit(args, {"valid": False, "error": str(exc)}, f"invalid: {exc}")
        return EXIT_ERROR
    handle = model.operator()
    try:
        if model.spec is not None:
            report = validate_spec(model.spec, args.samples, args.seed)
        else:
            report = validate_axioms(handle, args.samples, args.seed)
    except ErgodixError as exc:
        report = getattr(exc, "report", None)
        payload = {"valid": False, "error": str(exc)}
        if report is not None:
            payload.update(property=report.failed_property, violations=report.violations)
        _emit(args, payload, f"invalid: {exc}")
        return EXIT_ERROR
    if not report.passed:
        _emit(args, {"valid": False, "property": report.failed_property,
                     "violations": report.violations}, f"invalid: {report.summary()}")
        return EXIT_ERROR
    _emit(args, {"valid": True, "kind": model.kind, "n": model.n, "samples": report.samples},
          f"valid {model.kind} model with {model.n} states; {report.summary()}")
    return EXIT_OK


def cmd_certify(args) -> int:
    model = _load(args)
    pair = _pair(model)
    cert = certify(pair, workers=args.threads)
    payload = cert.to_dict()
    text = cert.to_text()
    if args.dot:
        paths = _write_dot(pair, args.dot)
        payload["dot"] = paths
        text += "\nDOT files: " + ", ".join(paths)
    _emit(args, payload, text)
    return EXIT_OK if cert.ergodic else EXIT_NEGATIVE


def cmd_hypergraphs(args) -> int:
    model = _load(args)
    pair = _pair(model)
    payload = {"provenance": {"plus": pair.provenance_plus, "minus": pair.provenance_minus},
               "hplus": _arcs_payload(pair.hplus), "hminus": _arcs_payload(pair.hminus)}
    lines = []
    for label, g, prov in (("H+", pair.hplus, pair.provenance_plus),
                           ("H-", pair.hminus, pair.provenance_minus)):
        lines.append(f"{label} ({prov}, size {g.size}):")
        lines.extend(f"  {sorted(d.tail)} -> {sorted(d.head)[0]}" for d in g.sorted_arcs())
    if args.dot:
        payload["dot"] = _write_dot(pair, args.dot)
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


def cmd_solve(args) -> int:
    model = _load(args)
    handle = model.operator()
    pair = solve_ergodic(handle, tol=args.tol, max_iter=args.max_iter)
    payload = {
        "converged": pair.converged,
        "eigenvalue": pair.eigenvalue,
        "bias": pair.bias.tolist(),
        "residual": pair.residual,
        "iterations": pair.iterations,
    }
    lines = [
        f"{'converged' if pair.converged else 'NOT converged'} after {pair.iterations} iterations",
        f"lambda = {pair.eigenvalue:.6f}",
        f"u = {_fmt(pair.bias)}",
        f"residual = {pair.residual:.3e}",
    ]
    if args.policies:
        game = model.shifted_game()
        if game is None:
            raise ErgodixError("--policies needs a finite_game model")
        strat = extract_policies(game, pair.bias, args.epsilon)
        payload["policies"] = {"min": list(strat.min_choice),
                               "max": [list(r) for r in strat.max_response],
                               "epsilon": strat.epsilon}
        lines.append(f"stationary strategies (epsilon = {args.epsilon}):")
        lines.extend("  " + s for s in strat.describe(game))
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK if pair.converged else EXIT_NEGATIVE


def cmd_meanpayoff(args) -> int:
    model = _load(args)
    est = value_iteration(model.operator(), args.iters)
    _emit(args, {"horizon": est.horizon, "mean_payoff": est.per_state.tolist()},
          f"v^k/k at k = {est.horizon}: {_fmt(est.per_state)}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = _load(args)
    game = model.shifted_game()
    if game is None:
        raise ErgodixError("simulate needs a finite_game model")
    pair = solve_ergodic(model.operator(), tol=args.tol, max_iter=args.max_iter)
    strat = extract_policies(game, pair.bias, args.epsilon)
    sim = simulate_stationary(game, strat, args.horizon, args.trials, args.seed)
    payload = {"horizon": sim.horizon, "trials": sim.trials, "seed": args.seed,
               "mean": sim.mean.tolist(), "stderr": sim.stderr.tolist(),
               "eigenvalue": pair.eigenvalue, "converged": pair.converged}
    text = "\n".join([
        f"empirical payoff per stage: {_fmt(sim.mean)}",
        f"standard error:             {_fmt(sim.stderr)}",
        f"eigenvalue from solver:     {pair.eigenvalue:.6f}"
        + ("" if pair.converged else " (solver did not converge)"),
    ])
    _emit(args, payload, text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ergodix", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("path", help="model file (JSON)")
        p.add_argument("--machine", action="store_true", help="emit JSON")
        p.add_argument("--renormalize", action="store_true",
                       help="divide transition rows by their sums instead of rejecting them")
        p.set_defaults(func=fn)
        return p

    p = command("validate", cmd_validate, "check a model file and the Shapley axioms")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)

    for name, fn, help_ in (("certify", cmd_certify, "decide ergodicity via hypergraph reachability"),
                            ("hypergraphs", cmd_hypergraphs, "list the minimal hyperarcs of H+ and H-")):
        p = command(name, fn, help_)
        p.add_argument("--dot", metavar="DIR", help="write hplus.dot and hminus.dot to DIR")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads for subset enumeration (default: $ERGODIX_THREADS or 1)")

    def solver_flags(p):
        p.add_argument("--g", help="payment perturbation, comma-separated")
        p.add_argument("--tol", type=float, default=1e-10)
        p.add_argument("--max-iter", type=int, default=1_000_000)
        p.add_argument("--epsilon", type=float, default=1e-9)

    p = command("solve", cmd_solve, "solve g + T(u) = lambda 1 + u")
    solver_flags(p)
    p.add_argument("--policies", action="store_true", help="print stationary strategies (finite games)")

    p = command("meanpayoff", cmd_meanpayoff, "estimate T^k(0)/k by value iteration")
    p.add_argument("--g", help="payment perturbation, comma-separated")
    p.add_argument("--iters", type=int, default=1000)

    p = command("simulate", cmd_simulate, "Monte Carlo payoff under the extracted stationary strategies")
    solver_flags(p)
    p.add_argument("--horizon", type=int, default=1000)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ErgodixError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
