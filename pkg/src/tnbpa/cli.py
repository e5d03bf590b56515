"""Command-line front end.

Exit codes are part of the contract: 0 bisimilar / success, 1 not bisimilar or
refutation found, 2 input error, 3 internal assertion failure.  Output is
deterministic for fixed inputs and flags (no timestamps in machine formats).
"""

from __future__ import annotations

import argparse
import json
import sys as _sys
from pathlib import Path

from . import engine, oracle
from .base import DecompositionBase, base_to_json, initial_base, render_base
from .strings import NormedString
from .model import (
    BpaSystem,
    ParseError,
    format_process,
    parse_process,
    parse_system,
    serialize_system,
)
from .normalization import (
    NotTotallyNormedError,
    UNNORMED,
    check_totally_normed,
    compute_norms,
    standardize,
    view,
)

EXIT_OK = 0
EXIT_REFUTED = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3


def _load_system(path: str) -> BpaSystem:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_system(text)


def _dump_trace(std, trace, path: str) -> None:
    Path(path).write_text(json.dumps(engine.trace_to_json(std, trace), indent=2) + "\n")


def _mode(args) -> engine.CandidateMode:
    return engine.CandidateMode(args.mode)


def cmd_check(args) -> int:
    sys = _load_system(args.file)
    std = standardize(sys)
    left = std.parse_process(args.left)
    right = std.parse_process(args.right)
    base, trace = engine.compute_bisimilarity_base(
        std, _mode(args), max_exhaustive=args.max_exhaustive
    )
    if args.trace:
        _dump_trace(std, trace, args.trace)
    verdict = engine.check_equivalence(std, left, right, base=base)
    bisimilar = verdict.kind is engine.VerdictKind.BISIMILAR

    verification = None
    if args.verify:
        # Exploration is bounded: pairs pumped beyond this norm are assumed
        # related, which keeps refutations sound and the search finite.
        budget = max([std.norm_of(left), std.norm_of(right), *std.norms, 0]) + 16
        ctx = oracle.GameContext(std, norm_budget=budget)
        gen_report = oracle.verify_base_generators(std, base, k_max=args.k, ctx=ctx)
        distinction = ctx.find_distinction(left, right, args.k)
        if distinction is not None:
            oracle.replay_distinction(std, distinction)
        if bisimilar and distinction is not None:
            print(
                json.dumps(oracle.distinction_to_json(std, distinction), indent=2),
                file=_sys.stderr,
            )
            raise AssertionError(
                f"oracle refutes the engine's bisimilar verdict for "
                f"{args.left!r} vs {args.right!r}"
            )
        if not gen_report.ok:
            raise AssertionError(
                f"{len(gen_report.failures)} generator check(s) failed on the final base"
            )
        verification = {
            "generator_checks": len(gen_report.checks),
            "generator_failures": len(gen_report.failures),
            "oracle": (
                "confirmed"
                if distinction is not None
                else f"no distinction found up to k={args.k}"
            ),
            "distinction": (
                oracle.distinction_to_json(std, distinction) if distinction is not None else None
            ),
        }

    dl = base.dcmp(left)
    dr = base.dcmp(right)
    if args.json:
        payload = {
            "verdict": verdict.kind.value,
            "left": args.left,
            "right": args.right,
            "dcmp_left": [std.sys.name(c) for c in dl.ids],
            "dcmp_right": [std.sys.name(c) for c in dr.ids],
            "iterations": len(trace),
            "base": base_to_json(std, base),
        }
        if verification is not None:
            payload["verification"] = verification
        print(json.dumps(payload, indent=2))
    else:
        print(f"verdict: {verdict.kind.value}")
        print(f"dcmp(left)  = {dl.to_text(std.sys.name)}")
        print(f"dcmp(right) = {dr.to_text(std.sys.name)}")
        if verification is not None:
            print(f"verification: generator checks ok; oracle {verification['oracle']}")
    return EXIT_OK if bisimilar else EXIT_REFUTED


def cmd_base(args) -> int:
    sys = _load_system(args.file)
    std = standardize(sys)
    final, trace = engine.compute_bisimilarity_base(
        std, _mode(args), max_exhaustive=args.max_exhaustive
    )
    if args.trace:
        _dump_trace(std, trace, args.trace)
    if args.json:
        payload = {"final": base_to_json(std, final), "iterations": len(trace)}
        if args.iterations:
            payload["trace"] = engine.trace_to_json(std, trace)
        print(json.dumps(payload, indent=2))
    else:
        if args.iterations:
            current = initial_base(std)
            print("== initial base ==")
            print(render_base(std, current))
            for rec in trace:
                print(f"== after iteration {rec.number} ==")
                primes = set(rec.primes_after)
                eqs = {
                    c.constant: NormedString(c.equation, std.norms)
                    for c in rec.constants
                    if c.equation is not None
                }
                snapshot = DecompositionBase(std.n, primes, eqs, std.norms)
                print(render_base(std, snapshot))
        print(render_base(std, final))
    return EXIT_OK


def cmd_norms(args) -> int:
    sys = _load_system(args.file)
    table = compute_norms(sys)
    if args.json:
        print(
            json.dumps(
                {
                    c.name: (None if table.values[c.id] == UNNORMED else int(table.values[c.id]))
                    for c in sys.constants
                },
                indent=2,
            )
        )
    else:
        for c in sys.constants:
            v = table.values[c.id]
            print(f"{c.name} {'inf' if v == UNNORMED else int(v)}")
    violations = check_totally_normed(sys, table)
    for violation in violations:
        print(f"warning: {violation}", file=_sys.stderr)
    return EXIT_OK


def cmd_standardize(args) -> int:
    sys = _load_system(args.file)
    std = standardize(sys)
    out = serialize_system(std.sys)
    out += "# standard order (index, constant, norm, merged originals):\n"
    merged: dict[str, list[str]] = {}
    for orig, rep in std.name_map.items():
        merged.setdefault(rep, []).append(orig)
    for i in range(std.n):
        name = std.sys.name(i)
        originals = " ".join(sorted(merged.get(name, [name])))
        out += f"#   {i + 1}. {name} norm={std.norms[i]} <- {originals}\n"
    print(out, end="")
    return EXIT_OK


def cmd_gen(args) -> int:
    params = oracle.GenParams(
        constants=args.constants,
        max_rhs_len=args.max_rhs_len,
        alphabet=args.alphabet,
        silent_prob=args.silent_prob,
        norm_cap=args.norm_cap,
        extra_rules=args.extra_rules,
        composite_prob=args.composite_prob,
        seed=args.seed,
    )
    text = serialize_system(oracle.random_system(params))
    if args.output:
        Path(args.output).write_text(text)
    else:
        print(text, end="")
    return EXIT_OK


def cmd_oracle(args) -> int:
    sys = _load_system(args.file)
    sem = view(sys)
    left = parse_process(args.left, sys)
    right = parse_process(args.right, sys)
    distinction = oracle.find_distinction(sem, left, right, args.k)
    if distinction is None:
        if args.json:
            print(json.dumps({"result": "no-distinction-found", "k": args.k}))
        else:
            print(f"no distinction found up to k={args.k} (not a bisimilarity proof)")
        return EXIT_OK
    oracle.replay_distinction(sem, distinction)
    if args.json:
        print(
            json.dumps(
                {
                    "result": "distinction",
                    "k": args.k,
                    "size": distinction.size(),
                    "strategy": oracle.distinction_to_json(sem, distinction),
                },
                indent=2,
            )
        )
    else:
        print(
            f"distinction found (strategy tree of {distinction.size()} nodes); "
            f"attacker opens with {distinction.side} "
            f"-{distinction.action}-> {format_process(sys, distinction.target)}"
        )
    return EXIT_REFUTED


def cmd_fuzz(args) -> int:
    params = oracle.GenParams(
        constants=args.constants,
        max_rhs_len=args.max_rhs_len,
        alphabet=args.alphabet,
        silent_prob=args.silent_prob,
        norm_cap=args.norm_cap,
        extra_rules=args.extra_rules,
        composite_prob=args.composite_prob,
        seed=args.seed,
    )
    report = oracle.differential_run(
        params,
        args.trials,
        args.k,
        pairs_per_trial=args.pairs,
        check_modes=not args.no_mode_check,
        jobs=args.jobs,
    )
    for trial in report.trials:
        print(json.dumps(trial.to_json()))
    print(json.dumps({"summary": report.to_json()}))
    bad = not report.ok or any(t.mode_agree is False for t in report.trials)
    return EXIT_REFUTED if bad else EXIT_OK


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["pruned", "exhaustive"], default="pruned")
    p.add_argument("--trace", metavar="PATH", help="write the refinement trace as JSON")
    p.add_argument(
        "--max-exhaustive",
        type=int,
        default=engine.DEFAULT_MAX_EXHAUSTIVE,
        help="guard on the exhaustive candidate count",
    )


def _add_gen_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--constants", type=int, default=6)
    p.add_argument("--max-rhs-len", type=int, default=3)
    p.add_argument("--alphabet", type=int, default=2)
    p.add_argument("--silent-prob", type=float, default=0.3)
    p.add_argument("--norm-cap", type=int, default=4)
    p.add_argument("--extra-rules", type=int, default=2)
    p.add_argument("--composite-prob", type=float, default=0.35)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tnbpa",
        description="Branching bisimilarity on totally normed BPA systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="decide whether two processes are bisimilar")
    p.add_argument("file")
    p.add_argument("--left", required=True, help="process, e.g. \"X Y\" or eps")
    p.add_argument("--right", required=True)
    p.add_argument("--json", action="store_true")
    p.add_argument("--verify", action="store_true", help="cross-check with the game oracle")
    p.add_argument("--k", type=int, default=16, help="oracle round bound for --verify")
    _add_engine_flags(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("base", help="print the final decomposition base")
    p.add_argument("file")
    p.add_argument("--json", action="store_true")
    p.add_argument("--iterations", action="store_true", help="also print per-iteration bases")
    _add_engine_flags(p)
    p.set_defaults(func=cmd_base)

    p = sub.add_parser("norms", help="print the norm table")
    p.add_argument("file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_norms)

    p = sub.add_parser("standardize", help="print the standard-ordered system")
    p.add_argument("file")
    p.set_defaults(func=cmd_standardize)

    p = sub.add_parser("gen", help="generate a random totally normed system")
    _add_gen_flags(p)
    p.add_argument("-o", "--output", metavar="FILE")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("oracle", help="search for a replayable distinction")
    p.add_argument("file")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--k", type=int, default=16)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("fuzz", help="differential run: engine vs oracle on random systems")
    _add_gen_flags(p)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--pairs", type=int, default=20, help="process pairs per trial")
    p.add_argument("--k", type=int, default=16)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-mode-check", action="store_true", help="skip the exhaustive-mode comparison")
    p.set_defaults(func=cmd_fuzz)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, NotTotallyNormedError, engine.ExhaustiveGuardError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_INPUT
    except oracle.GuardExceeded as exc:
        print(f"resource guard: {exc}", file=_sys.stderr)
        return EXIT_INTERNAL
    except (AssertionError, engine.EngineInternalError) as exc:
        print(f"internal error: {exc}", file=_sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
