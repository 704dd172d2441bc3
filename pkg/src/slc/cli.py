"""Command-line interface: ``slc {eval,trace,bn,sample,check} ...``.

Exit status is 0 on success, 1 when evaluation fails, 2 for usage, parse or
input-format errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Sequence, TextIO

from slc.approx import mc_estimate
from slc.bn import (TRUE, AllMassConditioned, NetworkError, brute_force_query, compile_query,
                    load_network, marginalize_n, parse_evidence)
from slc.evaluator import EvalConfig, EvalError, Laziness, normalize_eta, peval
from slc.syntax import ParseError, format_prob, parse, show
from slc.terms import TermError

EXIT_OK, EXIT_EVAL, EXIT_USAGE = 0, 1, 2
CHECK_TOLERANCE = 1e-9


class _UsageError(Exception):
    pass


def _fmt(p: float, full: bool) -> str:
    return format_prob(p) if full else f"{p:.6f}"


def _seed_default() -> int:
    raw = os.environ.get("SLC_SEED")
    if raw is None:
        return 0
    try:
        return int(raw, 0)
    except ValueError:
        raise _UsageError(f"SLC_SEED must be an integer, got {raw!r}") from None


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slc", description="Exact and approximate inference "
                                 "for a stochastic lambda calculus in de Bruijn notation.")
    sub = ap.add_subparsers(dest="command", required=True)

    evalopts = argparse.ArgumentParser(add_help=False)
    evalopts.add_argument("--fuel", type=int, help="maximum number of beta/gamma steps")
    evalopts.add_argument("--prune-epsilon", type=float, default=0.0,
                          help="drop branches with probability below this")
    evalopts.add_argument("--improper-beta", action="store_true",
                          help="substitute distributed arguments as independent draws")
    evalopts.add_argument("--no-cache", action="store_true")
    evalopts.add_argument("--laziness", choices=[m.value for m in Laziness],
                          default=Laziness.IMPROVED.value)
    evalopts.add_argument("--eta", action="store_true", help="eta-normalize before evaluating")
    evalopts.add_argument("--full-precision", action="store_true")

    p = sub.add_parser("eval", parents=[evalopts], help="evaluate a .slc term")
    p.add_argument("path")
    p.add_argument("--trace", action="store_true", help="print every reduction step")

    p = sub.add_parser("trace", parents=[evalopts], help="evaluate and print every step")
    p.add_argument("path")

    p = sub.add_parser("bn", parents=[evalopts], help="query a Bayesian network document")
    p.add_argument("path")
    p.add_argument("--query")
    p.add_argument("--evidence", action="append", default=[], metavar="NAME=T|F")
    p.add_argument("--trace", action="store_true")

    p = sub.add_parser("sample", help="Monte-Carlo estimate of a term or network query")
    p.add_argument("path")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--fuel", type=int)
    p.add_argument("--query")
    p.add_argument("--evidence", action="append", default=[], metavar="NAME=T|F")
    p.add_argument("--full-precision", action="store_true")

    p = sub.add_parser("check", help="compare compiled network queries with enumeration")
    p.add_argument("path")
    p.add_argument("--query")
    p.add_argument("--evidence", action="append", default=[], metavar="NAME=T|F")
    return ap


def _config(args) -> EvalConfig:
    if args.fuel is not None and args.fuel < 1:
        raise _UsageError("--fuel must be at least 1")
    if not 0.0 <= args.prune_epsilon < 1.0:
        raise _UsageError("--prune-epsilon must be in [0, 1)")
    return EvalConfig(fuel=args.fuel, laziness=Laziness(args.laziness),
                      improper_beta=args.improper_beta, prune_epsilon=args.prune_epsilon,
                      cache=not args.no_cache)


def _read_term(path: str):
    return parse(Path(path).read_text(encoding="utf-8"))


def _run_eval(t, args, out: TextIO, trace: bool) -> None:
    if args.eta:
        t = normalize_eta(t)
    on_step = (lambda n, step: print(step.format(n), file=out)) if trace else None
    result = peval(t, _config(args), on_step=on_step)
    for v, p in result.outcome.items():
        print(f"{show(v)}: {_fmt(p, args.full_precision)}", file=out)
    if result.unknown_mass > 0.0:
        print(f"unknown: {_fmt(result.unknown_mass, args.full_precision)}", file=out)


def _spec(args):
    net = load_network(args.path)
    return net, net.spec(args.query, parse_evidence(args.evidence))


def _cmd_bn(args, out: TextIO) -> None:
    net, spec = _spec(args)
    t = compile_query(net, spec)
    if args.eta:
        t = normalize_eta(t)
    on_step = (lambda n, step: print(step.format(n), file=out)) if args.trace else None
    result = peval(t, _config(args), on_step=on_step)
    full = args.full_precision
    if result.unknown_mass > 0.0:
        # no posterior without the full outcome; report what was resolved
        for v, p in result.outcome.items():
            print(f"{show(v)}: {_fmt(p, full)}", file=out)
        print(f"unknown: {_fmt(result.unknown_mass, full)}", file=out)
        return
    posterior = marginalize_n(result.outcome)
    print(f"P({spec.query}=T) = {_fmt(posterior.prob(TRUE), full)}", file=out)


def _cmd_sample(args, out: TextIO) -> None:
    seed = args.seed if args.seed is not None else _seed_default()
    if args.samples < 1:
        raise _UsageError("--samples must be at least 1")
    is_network = args.path.endswith(".json")
    if is_network:
        net, spec = _spec(args)
        t = compile_query(net, spec)
    else:
        t = _read_term(args.path)
    stats = mc_estimate(t, args.samples, seed, fuel=args.fuel)
    full = args.full_precision
    print(f"samples: {stats.samples}", file=out)
    print(f"seed: {stats.seed}", file=out)
    for v, p in stats.estimate.items():
        print(f"{show(v)}: {_fmt(p, full)}", file=out)
    if is_network:
        posterior = marginalize_n(stats.estimate)
        print(f"P({spec.query}=T) ~= {_fmt(posterior.prob(TRUE), full)}", file=out)


def _cmd_check(args, out: TextIO) -> int:
    net = load_network(args.path)
    evidence = dict(net.evidence)
    evidence.update(parse_evidence(args.evidence))
    query = args.query or net.query
    queries = [query] if query else [n for n in net.names if n not in evidence]
    worst = 0.0
    for q in queries:
        spec = net.spec(q, evidence)
        exact = brute_force_query(net, spec)
        got = marginalize_n(peval(compile_query(net, spec)).outcome)
        dev = got.max_deviation(exact)
        worst = max(worst, dev)
        print(f"{q}: compiled {got.prob(TRUE):.12f} oracle {exact.prob(TRUE):.12f} "
              f"deviation {dev:.3e}", file=out)
    ok = worst <= CHECK_TOLERANCE
    print(f"{'PASS' if ok else 'FAIL'} max deviation {worst:.3e}", file=out)
    return EXIT_OK if ok else EXIT_EVAL


def run(argv: Sequence[str], out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.command in ("eval", "trace"):
            _run_eval(_read_term(args.path), args, out,
                      trace=args.command == "trace" or args.trace)
        elif args.command == "bn":
            _cmd_bn(args, out)
        elif args.command == "sample":
            _cmd_sample(args, out)
        else:
            return _cmd_check(args, out)
    except AllMassConditioned as exc:
        print(f"slc: evaluation failed: {exc}", file=err)
        return EXIT_EVAL
    except (ParseError, NetworkError, _UsageError, OSError) as exc:
        print(f"slc: error: {exc}", file=err)
        return EXIT_USAGE
    except (EvalError, TermError) as exc:
        print(f"slc: evaluation failed: {exc}", file=err)
        return EXIT_EVAL
    return EXIT_OK


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
