"""Command-line entry point.

Exit codes: 0 success, 1 campaign or file error, 2 usage error, 3 the
campaign recorded at least one check finding.
"""

from __future__ import annotations

import argparse
import json
import logging
import shlex
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .bench import format_table, sweep, to_csv
from .config import KEYS, build_fuzz_config, load_config_file
from .corpus import load_chromosomes
from .dut import SUMMARIES, create_dut, list_duts, run_stimulus
from .dut.wire import SubprocessDut
from .errors import ConfigError, CorpusError, NoSeedsError, SimfuzzError
from .executor import CampaignReport, format_breakdown, run_campaign, stage_timing_report
from .grammar import decode_report, load_templates, translate

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_FINDING = 0, 1, 2, 3
log = logging.getLogger("simfuzz")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Raise instead of exiting so main() owns every exit code."""

    def error(self, message):
        raise UsageError(message)


def _add_common(p):
    # also accepted after the subcommand; SUPPRESS keeps the global value otherwise
    p.add_argument("-c", "--config", default=argparse.SUPPRESS, help="key = value configuration file")
    p.add_argument("-o", "--out", default=argparse.SUPPRESS, help="output directory")
    p.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)


def _add_run_options(p):
    _add_common(p)
    g = p.add_argument_group("design")
    g.add_argument("--dut", choices=list_duts(), help="bundled design (default toy-cpu)")
    g.add_argument("--dut-cmd", help="external simulator command speaking the stdio protocol")
    g.add_argument("--templates", help="transaction template table for --dut-cmd")
    g.add_argument("--backend", choices=("python", "cython"), help="kernel backend for bundled designs")
    g.add_argument("--delay-us", type=float, help="synth-delay: per-cycle delay in microseconds")
    g.add_argument("--delay-mode", choices=("spin", "sleep"), help="synth-delay: busy-wait or sleep")
    g.add_argument("--coverpoints", type=int, help="synth-delay: coverpoint count")
    g = p.add_argument_group("campaign")
    g.add_argument("--seeds", help="initial seeds directory (default: the design's bundled seeds)")
    g.add_argument("--mode", choices=("serial", "batch", "pipelined"))
    g.add_argument("--threads", type=int)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--max-iters", type=int)
    g.add_argument("--stagnation", type=int, help="stop after this many iterations without new coverage")
    g.add_argument("--master-seed", type=int)
    g.add_argument("--time-budget", type=float, help="stop after this many seconds")
    g.add_argument("--stop-on-finding", action="store_const", const=True)
    g.add_argument("--stop-at-coverage", type=float, help="stop once this coverage fraction is reached")
    g.add_argument("--generator", choices=("mutation", "random"))
    g.add_argument("--coverage-path", choices=("sketched", "report"))
    g = p.add_argument_group("mutation and fitness")
    g.add_argument("--favor", type=float)
    g.add_argument("--epsilon-fitness", type=float)
    g.add_argument("--p-splice", type=float)
    g.add_argument("--max-stack-exp", type=int)
    g.add_argument("--max-chromosome-bytes", type=int)
    g.add_argument("--max-corpus-size", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="simfuzz", description="Coverage-guided fuzzing for cycle-stepped hardware models.")
    parser.add_argument("--version", action="version", version=f"simfuzz {__version__}")
    parser.add_argument("-c", "--config", help="key = value configuration file")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("-o", "--out", help="output directory")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    run = sub.add_parser("run", help="run a fuzzing campaign")
    _add_run_options(run)

    bench = sub.add_parser("bench", help="throughput sweep over modes and thread counts")
    _add_run_options(bench)
    bench.add_argument("--thread-counts", default="1,2,4", help="comma-separated thread counts")
    bench.add_argument("--modes", default="batch,pipelined", help="comma-separated modes besides serial")
    bench.add_argument("--budget", type=float, default=5.0, help="seconds per configuration")
    bench.add_argument("--csv", help="also write the table as CSV to this path")

    rep = sub.add_parser("report", help="summarize a campaign report")
    rep.add_argument("path", help="report.json or a campaign output directory")
    rep.add_argument("--json", action="store_true", help="print the raw report")

    corp = sub.add_parser("corpus", help="list a corpus directory")
    corp.add_argument("path")
    corp.add_argument("--dut", choices=list_duts(), default=None)
    corp.add_argument("--dut-cmd")
    corp.add_argument("--templates")
    corp.add_argument("--recompute", action="store_true", help="re-run every seed and print its coverage")
    corp.add_argument("--decode", action="store_true", help="print each seed's decoded stimulus")

    sub.add_parser("list-duts", help="list bundled designs")
    return parser


def _merged_values(args) -> dict:
    values = {}
    if args.config:
        values.update(load_config_file(args.config))
    for key in KEYS:
        cli = getattr(args, key, None)
        if cli is not None:
            values[key] = cli
    if args.out is not None:
        values["out"] = args.out
    if args.verbose:
        values["verbosity"] = args.verbose
    logging.getLogger().setLevel(logging.WARNING - 10 * values.get("verbosity", 0))
    return values


def _check_paths(values):
    for key in ("seeds", "templates"):
        path = values.get(key)
        if path is not None and not Path(path).exists():
            raise UsageError(f"{key} path does not exist: {path}")


def cmd_run(args) -> int:
    values = _merged_values(args)
    _check_paths(values)
    config = build_fuzz_config(values)
    report = run_campaign(config)
    sys.stdout.write(report.summary())
    if config.out_dir:
        print(f"outputs written to {config.out_dir}")
    return EXIT_FINDING if report.findings else EXIT_OK


def cmd_bench(args) -> int:
    values = _merged_values(args)
    values.setdefault("dut", "synth-delay")
    if values["dut"] == "synth-delay":
        values.setdefault("delay_us", 1000.0)
    _check_paths(values)
    try:
        threads = [int(t) for t in args.thread_counts.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"bad --thread-counts {args.thread_counts!r}") from None
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    if not threads or min(threads) < 1 or any(m not in ("batch", "pipelined") for m in modes):
        raise UsageError("thread counts must be >= 1 and modes batch and/or pipelined")
    base = build_fuzz_config(values)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rows = sweep(base, threads, modes, args.budget)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    sys.stdout.write(format_table(rows))
    text = to_csv(rows)
    if args.csv:
        Path(args.csv).write_text(text, encoding="utf-8")
    if values.get("out"):
        out = Path(values["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "bench.csv").write_text(text, encoding="utf-8")
    return EXIT_OK


def _load_report(path: Path) -> CampaignReport:
    if path.is_dir():
        path = path / "report.json"
    try:
        return CampaignReport.load(path)
    except FileNotFoundError:
        raise CorpusError("report not found", path) from None
    except (json.JSONDecodeError, TypeError, UnicodeDecodeError) as exc:
        raise CorpusError(f"corrupt report ({exc})", path) from None


def cmd_report(args) -> int:
    report = _load_report(Path(args.path))
    if args.json:
        print(report.to_json())
        return EXIT_OK
    print(f"coverage_rate {report.coverage_rate:.4f} ({report.covered}/{report.coverpoints})")
    print(f"iterations {report.iterations} executions {report.executions}")
    print(f"findings {len(report.findings)}")
    if report.timing:
        print(format_breakdown(stage_timing_report(report)))
    return EXIT_OK


def _open_dut(args):
    if args.dut_cmd:
        grammar = load_templates(args.templates) if args.templates else None
        return SubprocessDut(shlex.split(args.dut_cmd), grammar=grammar)
    return create_dut(args.dut or "toy-cpu")


def cmd_corpus(args) -> int:
    loaded = load_chromosomes(args.path)
    dut = _open_dut(args) if (args.recompute or args.decode) else None
    try:
        for chrom in loaded.chromosomes:
            line = f"seed-{chrom.id}\t{len(chrom.data)} bytes"
            if dut is not None:
                desc = dut.descriptor
                stim = translate(chrom.data, desc.input_width_bits, desc.grammar, chrom.id)
                if args.recompute:
                    cov = run_stimulus(dut, stim).coverage
                    line += f"\tcovered {int(np.count_nonzero(cov))}/{len(cov)}"
                print(line)
                if args.decode:
                    sys.stdout.write(decode_report(stim))
            else:
                print(line)
    finally:
        if dut is not None:
            dut.close()
    print(f"{len(loaded.chromosomes)} seeds")
    return EXIT_OK


def cmd_list_duts(args) -> int:
    for name in list_duts():
        d = create_dut(name).descriptor
        print(f"{name:<12} width={d.input_width_bits:<3} coverpoints={d.coverpoint_count:<4} "
              f"grammar={d.grammar.kind:<12} {SUMMARIES[name]}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "bench": cmd_bench, "report": cmd_report, "corpus": cmd_corpus,
            "list-duts": cmd_list_duts}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required")
    except UsageError as exc:
        print(f"simfuzz: error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"simfuzz: error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except NoSeedsError as exc:
        print(f"simfuzz: error: {exc}", file=sys.stderr)
        return EXIT_USAGE if args.command == "run" else EXIT_ERROR
    except CorpusError as exc:
        print(f"simfuzz: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (SimfuzzError, OSError) as exc:
        print(f"simfuzz: campaign error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except KeyboardInterrupt:
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
