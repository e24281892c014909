"""Command-line driver: gen-trace, profile, analyze, learn, simulate, report.

Exit codes: 0 ok, 1 usage/other, 2 I/O, 3 store version, 4 file format/schema.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from tpsim.analysis import analyze_counters, analyze_store
from tpsim.config import RunConfig, load_config, with_seed
from tpsim.errors import TpsimError, UsageError
from tpsim.hints import load_manifest, write_manifest
from tpsim.learning import STORE_FAMILY, learn, load_store, write_store
from tpsim.profiler import COUNTER_MAGIC, load_counters, profile, write_counters
from tpsim.report import format_per_pc, format_report, format_storage_table, join_reports
from tpsim.simulate import Policy, simulate
from tpsim.trace import Pattern, TraceFormat, generate_trace, load_trace, write_trace

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_IO = 2


class _Parser(argparse.ArgumentParser):
    # exit code 2 is reserved for I/O failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_OTHER, f"{self.prog}: error: {message}\n")


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _require_out(args, what: str) -> str:
    if args.out is None:
        raise UsageError(f"--out is required to write the {what}")
    return args.out


def cmd_gen_trace(args, config: RunConfig) -> int:
    spec = config.trace
    overrides = {}
    if args.pattern is not None:
        overrides["pattern"] = Pattern(args.pattern)
    if args.unique_addrs is not None:
        overrides["unique_addrs"] = args.unique_addrs
    if args.repetitions is not None:
        overrides["repetitions"] = args.repetitions
    if args.noise_ratio is not None:
        overrides["noise_ratio"] = args.noise_ratio
    try:
        spec = replace(spec, **overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    trace = generate_trace(spec)
    write_trace(trace, _require_out(args, "trace"), TraceFormat(args.format))
    return EXIT_OK


def cmd_profile(args, config: RunConfig) -> int:
    trace = load_trace(args.trace)
    period = args.sample_period if args.sample_period is not None else config.run.sample_period
    counters, app = profile(trace, sample_period=period, cache=config.cache, seed=config.run.seed)
    write_counters(_require_out(args, "counter file"), counters, app)
    return EXIT_OK


def cmd_analyze(args, config: RunConfig) -> int:
    path = Path(args.input)
    with path.open() as fh:
        head = fh.readline().strip()
    params = config.analysis_params()
    if head.startswith(STORE_FAMILY):
        csr, hints = analyze_store(load_store(path), params)
    elif head == COUNTER_MAGIC:
        counters, app = load_counters(path)
        csr, hints = analyze_counters(counters, app, params)
    else:
        raise UsageError(f"{path}: neither a counter file nor a counter store")
    write_manifest(_require_out(args, "manifest"), csr, hints)
    return EXIT_OK


def cmd_learn(args, config: RunConfig) -> int:
    store_path = Path(args.store)
    store = load_store(store_path) if store_path.exists() else None
    counters, app = load_counters(args.counters)
    updated = learn(store, counters, app, cap_L=config.run.cap_L)
    write_store(args.out if args.out is not None else store_path, updated)
    return EXIT_OK


def cmd_simulate(args, config: RunConfig) -> int:
    policy = Policy(args.policy) if args.policy is not None else config.run.policy
    manifest = load_manifest(args.manifest) if args.manifest is not None else None
    if policy is Policy.PROPHET and manifest is None:
        raise UsageError("policy 'prophet' requires --manifest")
    trace = load_trace(args.trace)
    run_id = args.run_id or f"{Path(args.trace).stem}-seed{config.run.seed}"
    report = simulate(trace, policy, config.sim_config(), manifest, run_id=run_id)
    _emit(format_report([report]), args.out)
    if args.per_pc_out is not None:
        Path(args.per_pc_out).write_text(format_per_pc(report))
    return EXIT_OK


def cmd_report(args, config: RunConfig) -> int:
    _emit(join_reports(args.reports), args.out)
    if not args.no_storage:
        # keep stdout a clean CSV when it carries the joined report
        stream = sys.stdout if args.out is not None else sys.stderr
        stream.write(format_storage_table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for every random choice")
    common.add_argument("--config", default=argparse.SUPPRESS, help="key=value configuration file")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output path")

    parser = _Parser(prog="tpsim", description="Temporal prefetching simulator and profile-guided hint pipeline.", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-trace", parents=[common], help="generate a synthetic trace")
    p.add_argument("--pattern", choices=[x.value for x in Pattern])
    p.add_argument("--unique-addrs", type=int)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--noise-ratio", type=float)
    p.add_argument("--format", choices=[f.value for f in TraceFormat], default=TraceFormat.BINARY.value)
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("profile", parents=[common], help="profile a trace into a counter file")
    p.add_argument("trace")
    p.add_argument("--sample-period", type=int)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("analyze", parents=[common], help="turn counters or a store into a hint manifest")
    p.add_argument("input")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("learn", parents=[common], help="merge a counter file into the counter store")
    p.add_argument("counters")
    p.add_argument("--store", required=True, help="store to update (created when absent)")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("simulate", parents=[common], help="simulate one policy and write a report row")
    p.add_argument("trace")
    p.add_argument("--policy", choices=[x.value for x in Policy])
    p.add_argument("--manifest")
    p.add_argument("--run-id")
    p.add_argument("--per-pc-out", help="also write per-PC statistics here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", parents=[common], help="join report CSVs and print the storage table")
    p.add_argument("reports", nargs="+")
    p.add_argument("--no-storage", action="store_true", help="skip the storage table")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # --help exits 0, argument errors exit 1; return instead so callers can embed main()
        return exc.code if isinstance(exc.code, int) else EXIT_OTHER
    for name in ("seed", "config", "out"):
        if not hasattr(args, name):
            setattr(args, name, None)
    try:
        config = with_seed(load_config(args.config), args.seed)
        return args.func(args, config)
    except TpsimError as exc:
        print(f"tpsim: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        where = exc.filename if exc.filename is not None else ""
        print(f"tpsim: error: {where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
