"""Command line entry point: ``rtrf <command> [options]``.

Commands::

    gen        write a bundled or synthetic workload (trace, optionally listing)
    cfg        build a CFG from a listing, profiled with a trace, as JSON
    recommend  derive the recommendation table
    simulate   run one policy, or all four and emit a results CSV row
    sweep      run a configuration grid over workloads into a results CSV
    report     summarise a results CSV
"""

from __future__ import annotations

import argparse
import logging
import sys
from contextlib import contextmanager
from pathlib import Path

from .cfg import Cfg, ListingError, annotate_probabilities, build_cfg, parse_listing
from .geometry import CostParams, GeometryError, load_geometry
from .rectable import FingerprintMismatch, MissingRecommendation, RecommendationTable
from .recommender import PruneOptions, build_table
from .reports import SweepSpec, comparison_row, format_number, read_rows, render_report, run_sweep, write_rows
from .simulator import METRICS, STATIC_H, STATIC_V, LOptPolicy, RecPolicy, compile_trace, lopt_schedule, run_versions, simulate
from .synthetic import BUNDLED, SyntheticSpec, bundled_workload, synthetic_workload
from .trace import TraceParseError, read_trace, write_trace

log = logging.getLogger("racetrack_rf")


class CliError(Exception):
    pass


@contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _prune(args) -> PruneOptions:
    return PruneOptions(args.prune_max_paths, args.prune_min_weight, args.hysteresis)


def _load_cfg(args, geom) -> Cfg:
    if args.cfg:
        cfg = Cfg.from_json(Path(args.cfg).read_text())
    elif args.listing:
        cfg = build_cfg(parse_listing(Path(args.listing).read_text(), geom.num_regs))
    else:
        raise CliError("need --listing or --cfg")
    if args.trace:
        cfg = annotate_probabilities(cfg, read_trace(args.trace, geom.reg_bits, geom.num_regs), args.profile_limit)
    return cfg


# ---------------------------------------------------------------------------
# commands


def cmd_gen(args) -> int:
    if args.benchmark == "synthetic":
        spec = SyntheticSpec(
            args.count,
            working_set=args.working_set,
            hot_ratio=args.hot_ratio,
            write_fraction=args.write_fraction,
            value_bits=args.value_bits,
            seed=0 if args.seed is None else args.seed,
        )
        work = synthetic_workload(spec)
    else:
        work = bundled_workload(args.benchmark, args.seed)
    if args.out is None:
        raise CliError("gen needs --out for the trace")
    write_trace(args.out, work.trace)
    if args.listing_out:
        Path(args.listing_out).write_text(work.listing.serialize())
    return 0


def cmd_cfg(args) -> int:
    cfg = _load_cfg(args, load_geometry(args.geometry))
    with _output(args.out) as fh:
        fh.write(cfg.to_json())
    return 0


def cmd_recommend(args) -> int:
    geom = load_geometry(args.geometry)
    cfg = _load_cfg(args, geom)
    table = build_table(cfg, geom, args.window, _prune(args), args.aggregate, args.method)
    with _output(args.out) as fh:
        fh.write(table.serialize())
    return 0


def cmd_simulate(args) -> int:
    geom = load_geometry(args.geometry)
    if not args.trace:
        raise CliError("simulate needs --trace")
    trace = read_trace(args.trace, geom.reg_bits, geom.num_regs)
    table = None
    if args.policy in ("rec", "all"):
        if not args.rec_table:
            raise CliError(f"policy {args.policy} needs --rec-table")
        table = RecommendationTable.read(args.rec_table)
        table.check_geometry(geom)
    ct = compile_trace(trace, geom)
    if args.policy == "all":
        rep = run_versions(ct, geom, CostParams(), table, args.window, args.lopt_objective)
        with _output(args.out) as fh:
            write_rows([comparison_row(args.benchmark or Path(args.trace).stem, geom, args.window, rep)], fh)
        return 0
    if args.policy == "static-h":
        policy = STATIC_H
    elif args.policy == "static-v":
        policy = STATIC_V
    elif args.policy == "rec":
        policy = RecPolicy(table)
    else:
        policy = LOptPolicy(tuple(lopt_schedule(ct, geom, args.window, args.lopt_objective)))
    rep = simulate(ct, geom, None, policy, args.window)
    with _output(args.out) as fh:
        fh.write(f"policy={args.policy}\n")
        for m in METRICS:
            fh.write(f"total_{m}={format_number(getattr(rep.totals, m))}\n")
        fh.write(f"num_reads={rep.reads}\nnum_writes={rep.writes}\nswitches={rep.switches}\n")
    return 0


def cmd_sweep(args) -> int:
    base = load_geometry(args.geometry)
    spec = SweepSpec(
        num_aps=args.num_aps or [base.num_aps],
        num_tracks=args.num_tracks or [base.num_tracks],
        windows=args.windows or [args.window],
        base=base,
        prune=_prune(args),
        lopt_objective=args.lopt_objective,
        jobs=args.jobs,
    )
    benches = []
    for name in args.benchmark or []:
        work = bundled_workload(name, args.seed)
        benches.append((name, annotate_probabilities(build_cfg(work.listing), work.trace, args.profile_limit), work.trace))
    if args.listing or args.trace:
        if not (args.listing and args.trace):
            raise CliError("a custom sweep workload needs both --listing and --trace")
        listing = parse_listing(Path(args.listing).read_text(), base.num_regs)
        trace = read_trace(args.trace, base.reg_bits, base.num_regs)
        cfg = annotate_probabilities(build_cfg(listing), trace, args.profile_limit)
        benches.append((Path(args.trace).stem, cfg, trace))
    if not benches:
        raise CliError("sweep needs --benchmark or --listing/--trace")
    rows = run_sweep(spec, benches)
    with _output(args.out) as fh:
        write_rows(rows, fh)
    return 0


def cmd_report(args) -> int:
    with open(args.results, newline="") as fh:
        rows = read_rows(fh)
    for row in rows:
        if int(row["num_reads"]) + int(row["num_writes"]) == 0:
            log.warning("%s: zero register accesses, averages reported as 0", row["benchmark"])
    with _output(args.out) as fh:
        fh.write(render_report(rows))
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rtrf", description="Racetrack register file simulator and allocation recommender.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--geometry", help="geometry file or inline text, e.g. num_tracks=32,track_length=64,num_aps=2,num_regs=32,reg_bits=64 (the default)")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--seed", type=int, default=None, help="workload seed")

    profiled = argparse.ArgumentParser(add_help=False)
    profiled.add_argument("--listing", help="program listing file")
    profiled.add_argument("--trace", help="trace file (profile for cfg/recommend, workload for simulate/sweep)")
    profiled.add_argument("--profile-limit", type=int, default=1_000_000, help="instructions used for branch profiling")

    tuning = argparse.ArgumentParser(add_help=False)
    tuning.add_argument("--window", type=int, default=100, help="instructions between mode checks")
    tuning.add_argument("--prune-max-paths", type=int, default=4096)
    tuning.add_argument("--prune-min-weight", type=float, default=1e-6)
    tuning.add_argument("--hysteresis", type=float, default=None, help="decision margin in shifts (default: store/restore cost)")
    tuning.add_argument("--lopt-objective", choices=METRICS, default="shifts")

    g = sub.add_parser("gen", parents=[common], help="write a workload trace")
    g.add_argument("--benchmark", choices=sorted(BUNDLED) + ["synthetic"], default="synthetic")
    g.add_argument("--listing-out", help="also write the program listing here")
    g.add_argument("--count", type=int, default=100_000)
    g.add_argument("--working-set", type=int, default=2)
    g.add_argument("--hot-ratio", type=float, default=0.95)
    g.add_argument("--write-fraction", type=float, default=1 / 3)
    g.add_argument("--value-bits", type=float, default=4.0, help="mean set bits per written value")
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("cfg", parents=[common, profiled], help="build a CFG as JSON")
    c.add_argument("--cfg", help=argparse.SUPPRESS)
    c.set_defaults(func=cmd_cfg)

    r = sub.add_parser("recommend", parents=[common, profiled, tuning], help="derive recommendation bits")
    r.add_argument("--cfg", help="CFG JSON from the cfg command (instead of --listing)")
    r.add_argument("--aggregate", choices=("score", "vote"), default="score")
    r.add_argument("--method", choices=("dp", "paths"), default="dp")
    r.set_defaults(func=cmd_recommend)

    s = sub.add_parser("simulate", parents=[common, profiled, tuning], help="simulate a trace")
    s.add_argument("--policy", choices=("static-h", "static-v", "rec", "lopt", "all"), default="all")
    s.add_argument("--rec-table", help="recommendation table file")
    s.add_argument("--benchmark", help="benchmark label for the CSV row (default: trace file stem)")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", parents=[common, profiled, tuning], help="sweep configurations into a CSV")
    w.add_argument("--benchmark", action="append", choices=sorted(BUNDLED), help="bundled workload (repeatable)")
    w.add_argument("--num-aps", type=_int_list, help="comma-separated access port counts")
    w.add_argument("--num-tracks", type=_int_list, help="comma-separated track counts; length keeps capacity fixed")
    w.add_argument("--windows", type=_int_list, help="comma-separated window sizes")
    w.add_argument("--jobs", type=int, default=1, help="worker processes (row order is unaffected)")
    w.set_defaults(func=cmd_sweep)

    rp = sub.add_parser("report", help="summarise a results CSV")
    rp.add_argument("results", help="CSV from simulate or sweep")
    rp.add_argument("--out", help="output file (default stdout)")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (
        CliError,
        GeometryError,
        TraceParseError,
        ListingError,
        FingerprintMismatch,
        MissingRecommendation,
        OSError,
        ValueError,
        KeyError,
    ) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"rtrf {args.command}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
