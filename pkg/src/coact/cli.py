"""Command-line entry point: simulate, analyze, calibrate, replay."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import tomli_w

from .analysis.annotate import LedgerGap, annotate_log
from .analysis.calibrate import DEFAULT_SPACE, SearchSpaceEmpty, calibrate
from .analysis.reference import load_reference
from .analysis.report import render_svg, render_table, report_json
from .analysis.stats import EmptyCorpus, all_pass, compare, distribution
from .session.config import ConfigInvalid, load_batch
from .session.log import CorruptLog, expand_logs, read_log, write_log
from .session.orchestrator import run_batch
from .session.replay import replay
from .usersim.policy import PolicyError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_NO_INPUT = 4
EXIT_VERIFY = 5
_KINDS = {EXIT_CONFIG: "config", EXIT_RUNTIME: "runtime", EXIT_NO_INPUT: "no-input", EXIT_VERIFY: "verification"}

log = logging.getLogger("coact")


class CliError(Exception):
    def __init__(self, code: int, message: str) -> None:
        super().__init__(message)
        self.code = code


def diagnostic(code: int, message: str) -> str:
    """Single-line, machine-parsable error line."""
    flat = " ".join(str(message).split())
    return f"coact-error code={code} kind={_KINDS.get(code, 'error')}: {flat}"


def parse_seed(text: str | None) -> int | None:
    if text is None or text == "":
        return None
    try:
        value = int(text, 0)
    except ValueError:
        raise CliError(EXIT_CONFIG, f"seed {text!r} is not an integer") from None
    if not 0 <= value < 2**64:
        raise CliError(EXIT_CONFIG, f"seed {value} is outside the 64-bit unsigned range")
    return value


def resolve_seed(arg: str | None) -> int | None:
    """``--seed`` wins, then ``COACT_SEED``, then whatever the config says."""
    return parse_seed(arg) if arg is not None else parse_seed(os.environ.get("COACT_SEED"))


def _tolerance(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError("tolerance must be >= 0")
    return value


def _load(config: str, seed: int | None):
    try:
        return load_batch(config, seed)
    except FileNotFoundError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from exc
    except (ConfigInvalid, PolicyError) as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from exc


# -- subcommands ---------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    spec, policy, ref = _load(args.config, resolve_seed(args.seed))
    if args.sessions is not None:
        if args.sessions < 1:
            raise CliError(EXIT_CONFIG, "--sessions must be >= 1")
        spec = type(spec)(**{**spec.__dict__, "sessions": args.sessions})
    logs = run_batch(spec.configs(policy, ref), workers=args.workers)
    out = Path(args.out)
    suffix = ".jsonl.gz" if args.gzip else ".jsonl"
    for i, lg in enumerate(logs):
        write_log(lg, out / f"session-{i:03d}{suffix}")
    counts = [len(lg.turns) for lg in logs]
    print(f"simulated {len(logs)} sessions, {sum(counts)} turns "
          f"(min {min(counts)}, max {max(counts)}, mean {sum(counts) / len(counts):.1f}) -> {out}")
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    if args.reference_corpus:
        corpus = load_reference().corpus()
    else:
        paths = expand_logs(args.logs)
        if not paths:
            raise CliError(EXIT_NO_INPUT, f"no logs match {' '.join(args.logs) or '(nothing given)'}")
        corpus = []
        for p in paths:
            try:
                corpus.extend(annotate_log(read_log(p)))
            except (CorruptLog, LedgerGap) as exc:
                raise CliError(EXIT_RUNTIME, f"{p}: {exc}") from exc
    try:
        report = distribution(corpus)
    except EmptyCorpus as exc:
        raise CliError(EXIT_NO_INPUT, str(exc)) from exc
    reference = None
    verdicts = []
    if args.reference is not None:
        try:
            reference = load_reference(None if args.reference == "bundled" else args.reference)
        except (OSError, ValueError) as exc:
            raise CliError(EXIT_CONFIG, f"cannot read reference: {exc}") from exc
        verdicts = compare(report, reference, args.tolerance, top_k=args.top_k)
    if args.json:
        print(json.dumps(report_json(report, verdicts, args.tolerance if verdicts else None), indent=2, sort_keys=True))
    else:
        sys.stdout.write(render_table(report, verdicts, reference))
    if args.plot:
        Path(args.plot).write_text(render_svg(report, reference), encoding="utf-8")
    return EXIT_OK if all_pass(verdicts) else EXIT_VERIFY


def cmd_calibrate(args: argparse.Namespace) -> int:
    try:
        reference = load_reference(args.reference)
    except (OSError, ValueError) as exc:
        raise CliError(EXIT_CONFIG, f"cannot read reference: {exc}") from exc
    seed = resolve_seed(args.seed)
    spec, initial, _ = _load(args.config, None)
    if args.sessions is not None:
        spec = type(spec)(**{**spec.__dict__, "sessions": args.sessions})
    if args.budget < 0:
        raise CliError(EXIT_CONFIG, "--budget must be >= 0")

    def progress(n: int, fit) -> None:
        log.info("evaluation %d: distance %.3f", n, fit.distance)

    try:
        result = calibrate(reference, DEFAULT_SPACE, args.budget, seed or 0, initial, spec, progress=progress)
    except SearchSpaceEmpty as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from exc
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    session = {k: (list(v) if isinstance(v, tuple) else v) for k, v in spec.__dict__.items() if v is not None and k != "script"}
    out.write_text(tomli_w.dumps({"policy": result.policy.to_dict(), "session": session}), encoding="utf-8")
    report_path = Path(args.report) if args.report else out.with_suffix(".fit.json")
    report_path.write_text(json.dumps(result.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    dist = result.score.distance if result.score else float("nan")
    pres = result.score.presence_l1 if result.score else float("nan")
    print(f"calibrated with {result.evaluations} evaluations: distance {dist:.3f} (presence L1 {pres:.3f}) -> {out}")
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    paths = expand_logs(args.logs)
    if not paths:
        raise CliError(EXIT_NO_INPUT, f"no logs match {' '.join(args.logs)}")
    failures = 0
    for p in paths:
        try:
            lg = read_log(p)
        except CorruptLog as exc:
            raise CliError(EXIT_RUNTIME, f"{p}: {exc}") from exc
        try:
            snap = replay(lg, verify=args.verify)
        except CorruptLog as exc:
            failures += 1
            print(diagnostic(EXIT_VERIFY, f"{p}: {exc}"), file=sys.stderr)
            continue
        print(f"{p}: ok revision {snap.revision} nodes {len(snap.nodes)}")
    return EXIT_VERIFY if failures else EXIT_OK


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coact", description="Simulate and analyze concurrent user-agent co-creation sessions.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run simulated sessions and write their logs")
    p.add_argument("config", help="TOML/JSON config file or preset name (calibrated, delegator, interventionist)")
    p.add_argument("--seed", help="64-bit batch seed (default: COACT_SEED, then the config)")
    p.add_argument("--out", default="logs", help="output directory")
    p.add_argument("--sessions", type=int, help="override the number of sessions")
    p.add_argument("--gzip", action="store_true", help="write .jsonl.gz logs")
    p.add_argument("--workers", type=int, default=1, help="threads for independent sessions")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="annotate logs and report the turn-level distribution")
    p.add_argument("logs", nargs="*", help="log files, directories or glob patterns")
    p.add_argument("--reference", nargs="?", const="bundled", help="compare against reference statistics (default: bundled)")
    p.add_argument("--reference-corpus", action="store_true", help="analyze the corpus rebuilt from the bundled reference")
    p.add_argument("--tolerance", type=_tolerance, default=5.0, help="allowed deviation in percentage points")
    p.add_argument("--top-k", type=int, default=4, help="number of reference combinations to check")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--plot", help="write an SVG bar chart to this path")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("calibrate", help="fit the user policy to reference statistics")
    p.add_argument("--reference", help="reference statistics JSON (default: bundled)")
    p.add_argument("--config", default="calibrated", help="config or preset giving the session batch and the initial policy")
    p.add_argument("--budget", type=int, default=100, help="number of policy evaluations")
    p.add_argument("--sessions", type=int, help="sessions simulated per evaluation")
    p.add_argument("--seed", help="search seed (default: COACT_SEED, then 0)")
    p.add_argument("--out", default="fitted-policy.toml", help="where to write the fitted policy")
    p.add_argument("--report", help="where to write the fit report (default: next to --out)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("replay", help="re-apply logged operations")
    p.add_argument("logs", nargs="+", help="log files, directories or glob patterns")
    p.add_argument("--verify", action="store_true", help="fail unless the replay reproduces the logged canvas")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code not in (0, None):
            print(diagnostic(EXIT_CONFIG, "invalid command line"), file=sys.stderr)
            return EXIT_CONFIG
        return EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CliError as exc:
        print(diagnostic(exc.code, str(exc)), file=sys.stderr)
        return exc.code
    except (OSError, RuntimeError, ValueError) as exc:
        print(diagnostic(EXIT_RUNTIME, f"{type(exc).__name__}: {exc}"), file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
