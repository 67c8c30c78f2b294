"""Command-line front end: analyze, simulate, tree, bias, verify.

Exit codes: 0 success, 2 usage or validation error, 3 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import secrets
import sys
from dataclasses import dataclass
from typing import Any, Sequence

from . import analysis as an
from . import montecarlo as mc
from .protocol import ConfigurationError, ProtocolConfig, Strategy, UnknownQubit

EXIT_OK, EXIT_USAGE, EXIT_VERIFY = 0, 2, 3
INPUT_NORM_TOL = 1e-6
MAX_TREE_RESETS = 16
FORMATS = {
    "analyze": ("json",),
    "simulate": ("json", "csv"),
    "tree": ("json", "dot"),
    "bias": ("json",),
    "verify": ("json", "csv"),
}


class UsageError(Exception):
    pass


def _complex(z: complex) -> dict[str, float]:
    return {"re": z.real, "im": z.imag}


def _phi_doc(phi: UnknownQubit) -> dict[str, Any]:
    return {"a": _complex(phi.a), "b": _complex(phi.b)}


def dumps(doc: Any) -> str:
    # repr-based float output is the shortest string that round-trips a float64
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def parse_amplitudes(args: argparse.Namespace) -> UnknownQubit:
    cart = [args.a_re, args.a_im, args.b_re, args.b_im]
    polar = [args.theta, args.phase]
    has_cart = any(v is not None for v in cart)
    has_polar = any(v is not None for v in polar)
    if has_cart and has_polar:
        raise UsageError("give either --a-re/--a-im/--b-re/--b-im or --theta/--phase, not both")
    if not (has_cart or has_polar):
        raise UsageError("amplitudes required: --a-re/--a-im/--b-re/--b-im or --theta/--phase")
    if has_polar:
        theta = args.theta or 0.0
        phase = args.phase or 0.0
        return UnknownQubit.from_polar(theta, phase)
    a_re, a_im, b_re, b_im = (v or 0.0 for v in cart)
    a, b = complex(a_re, a_im), complex(b_re, b_im)
    if not all(math.isfinite(v) for v in (a_re, a_im, b_re, b_im)):
        raise UsageError("amplitudes must be finite")
    norm = abs(a) ** 2 + abs(b) ** 2
    if abs(norm - 1) > INPUT_NORM_TOL:
        raise UsageError(f"|a|^2 + |b|^2 = {norm!r} deviates from 1 by {abs(norm - 1):.3g} (> {INPUT_NORM_TOL:g})")
    return UnknownQubit.normalized(a, b)


def protocol_config(args: argparse.Namespace) -> ProtocolConfig:
    try:
        return ProtocolConfig(
            strategy=Strategy(args.strategy),
            max_resets=args.max_resets,
            copies_available=args.copies,
            amplitudes_known=not args.amplitudes_unknown,
        )
    except (ConfigurationError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def resolve_seed(args: argparse.Namespace) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(64)
        print(f"seed: {args.seed}", file=sys.stderr)
    if not 0 <= args.seed < 2**64:
        raise UsageError("--seed must be an unsigned 64-bit integer")
    return args.seed


def _check_trials(args: argparse.Namespace) -> None:
    if not 1 <= args.trials <= mc.MAX_TRIALS:
        raise UsageError(f"--trials must be in [1, {mc.MAX_TRIALS}]")


def cmd_analyze(args: argparse.Namespace) -> tuple[str, int]:
    phi = parse_amplitudes(args)
    cfg = protocol_config(args)
    depth = max(cfg.max_resets, 3)
    chain = an.reset_recursion(phi, depth - 1)
    summary = an.cost_summary(phi, cfg.max_resets, cfg.strategy)
    doc = {
        "phi": _phi_doc(phi),
        "strategy": cfg.strategy.value,
        "max_resets": cfg.max_resets,
        "h_t": summary.h_t,
        "one_bit_prob": summary.one_bit_prob,
        "completed_one_bit_prob": summary.completed_one_bit_prob,
        "expected_bits": summary.expected_bits,
        "expected_copies": summary.expected_copies,
        "reset_chain": [
            {"k": e.k, "a_k": _complex(e.a), "b_k": _complex(e.b), "p_success": e.p_success}
            for e in chain.entries
        ],
        "degenerate": chain.degenerate,
        "p_need_k_resets": {str(k): an.p_need_k_resets(phi, k) for k in range(1, depth + 1)},
        "phi_probs": list(summary.phi_probs),
        "expected_attempts_given_reset_success": summary.expected_attempts_given_reset_success,
    }
    return dumps(doc), EXIT_OK


def _stats_doc(phi: UnknownQubit, cfg: ProtocolConfig, stats: mc.TrialStats) -> dict[str, Any]:
    doc = {"phi": _phi_doc(phi), "copies_available": cfg.copies_available,
           "amplitudes_known": cfg.amplitudes_known}
    doc.update(stats.to_dict())
    return doc


def cmd_simulate(args: argparse.Namespace) -> tuple[str, int]:
    phi = parse_amplitudes(args)
    cfg = protocol_config(args)
    _check_trials(args)
    seed = resolve_seed(args)
    stats = mc.run_trials(mc.TrialConfig(args.trials, seed, phi, cfg), workers=args.workers)
    if args.format == "csv":
        return stats.to_csv(), EXIT_OK
    return dumps(_stats_doc(phi, cfg, stats)), EXIT_OK


def cmd_tree(args: argparse.Namespace) -> tuple[str, int]:
    phi = parse_amplitudes(args)
    cfg = protocol_config(args)
    if cfg.max_resets > MAX_TREE_RESETS:
        raise UsageError(f"--max-resets for tree export is capped at {MAX_TREE_RESETS}")
    tree = an.build_tree(phi, cfg.max_resets, cfg.strategy, cfg.copies_available)
    if args.format == "dot":
        return an.tree_to_dot(tree), EXIT_OK
    doc = {
        "phi": _phi_doc(phi),
        "strategy": cfg.strategy.value,
        "max_resets": cfg.max_resets,
        "leaf_probability_sum": tree.mass(lambda n: True),
        "one_bit_leaf_mass": tree.mass(lambda n: n.completed is True and n.bits_on_path == 1),
        "credited_one_bit_mass": an.credited_one_bit_mass(tree),
        "tree": tree.to_dict(),
    }
    return dumps(doc), EXIT_OK


def cmd_bias(args: argparse.Namespace) -> tuple[str, int]:
    phi = parse_amplitudes(args)
    cfg = protocol_config(args)
    _check_trials(args)
    seed = resolve_seed(args)
    bias = mc.run_bias_trials(mc.TrialConfig(args.trials, seed, phi, cfg), workers=args.workers)
    report = mc.compare_bias(bias, phi, cfg)
    doc = {
        "phi": _phi_doc(phi),
        "max_resets": cfg.max_resets,
        "unconditioned_bob_p0": an.bob_marginal(phi, cfg.max_resets, "unconditioned", cfg.strategy),
        "post_selected_bob_p0": an.bob_marginal(phi, cfg.max_resets, "post-selected", cfg.strategy),
        "keep_fraction": an.keep_fraction(phi, cfg.max_resets, cfg.strategy),
        "empirical": bias.to_dict(),
        "comparison": report.to_dict(),
    }
    return dumps(doc), EXIT_OK


@dataclass(frozen=True)
class VerifyCase:
    label: str
    phi: UnknownQubit
    config: ProtocolConfig
    bias: bool = False


def verify_matrix() -> list[VerifyCase]:
    r2 = 1 / math.sqrt(2)
    worked = UnknownQubit(1j * r2, (1 + 1j) / 2)
    plus = UnknownQubit(r2, r2)
    skew = UnknownQubit(math.sqrt(3) / 2, 0.5)
    return [
        VerifyCase("worked-example-one-reset", worked, ProtocolConfig(Strategy.RESET_RETRY, 1)),
        VerifyCase("plus-three-resets", plus, ProtocolConfig(Strategy.RESET_RETRY, 3)),
        VerifyCase("conventional", skew, ProtocolConfig(Strategy.CONVENTIONAL, 0)),
        VerifyCase("skewed-chain", skew, ProtocolConfig(Strategy.RESET_RETRY, 2)),
        VerifyCase("abandon-unknown-amplitudes", skew,
                   ProtocolConfig(Strategy.ABANDON_ON_FAIL, 1, amplitudes_known=False)),
        VerifyCase("basis-state", UnknownQubit(1, 0), ProtocolConfig(Strategy.RESET_RETRY, 5)),
        VerifyCase("three-copies", UnknownQubit(0.6, 0.8j), ProtocolConfig(Strategy.RESET_RETRY, 4, copies_available=3)),
        VerifyCase("bias-post-selection", UnknownQubit(math.sqrt(0.9), math.sqrt(0.1)),
                   ProtocolConfig(Strategy.RESET_RETRY, 1), bias=True),
    ]


def cmd_verify(args: argparse.Namespace) -> tuple[str, int]:
    _check_trials(args)
    seed = resolve_seed(args)
    reports = []
    for i, case in enumerate(verify_matrix()):
        tc = mc.TrialConfig(args.trials, (seed + i) % 2**64, case.phi, case.config)
        if case.bias:
            report = mc.compare_bias(mc.run_bias_trials(tc, workers=args.workers), case.phi, case.config,
                                     perturb=args.perturb_analytic)
        else:
            report = mc.compare(mc.run_trials(tc, workers=args.workers), case.phi, case.config,
                                perturb=args.perturb_analytic)
        report.label = case.label
        reports.append(report)
    ok = all(r.passed for r in reports)
    for r in reports:
        for row in r.failures():
            print(f"FAIL {r.label}:{row.statistic} analytic={row.analytic!r} empirical={row.empirical!r} "
                  f"z={row.z_score}", file=sys.stderr)
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["statistic", "analytic", "empirical", "stderr", "z", "pass"])
        for r in reports:
            for row in r.csv_rows():
                w.writerow([f"{r.label}:{row[0]}"] + row[1:])
        text = buf.getvalue()
    else:
        text = dumps({
            "seed": seed,
            "trials": args.trials,
            "z_threshold": mc.Z_THRESHOLD,
            "passed": ok,
            "cases": [r.to_dict() for r in reports],
        })
    return text, EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "tree": cmd_tree,
    "bias": cmd_bias,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    amp = common.add_argument_group("amplitudes (cartesian or polar)")
    for name in ("--a-re", "--a-im", "--b-re", "--b-im"):
        amp.add_argument(name, type=float)
    amp.add_argument("--theta", type=float, help="polar angle: a = cos(theta/2)")
    amp.add_argument("--phase", type=float, help="relative phase: b = e^{i phase} sin(theta/2)")
    common.add_argument("--trials", type=int, default=20000)
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed (generated and printed if omitted)")
    common.add_argument("--max-resets", type=int, default=1)
    common.add_argument("--strategy", choices=[s.value for s in Strategy], default=Strategy.RESET_RETRY.value)
    common.add_argument("--copies", type=int, help="copies of phi available (default unlimited)")
    common.add_argument("--amplitudes-unknown", action="store_true",
                        help="Alice does not know a, b (limits resets to one)")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--format", choices=["json", "csv", "dot"], default="json")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--perturb-analytic", type=float, default=0.0, help=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="telereset", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format not in FORMATS[args.command]:
        print(f"telereset {args.command}: --format {args.format} not supported "
              f"(choose from {', '.join(FORMATS[args.command])})", file=sys.stderr)
        return EXIT_USAGE
    if args.workers < 1:
        print("telereset: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        text, code = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"telereset {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
