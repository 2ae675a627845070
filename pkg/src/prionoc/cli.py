"""Command-line front end: analyze, simulate, sweep and compare.

Exit codes: 0 success, 1 usage or configuration error, 2 unstable
traffic, 3 comparison mismatch.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .analysis import analyze, compare, end_to_end, read_report_csv
from .config import RunConfig, dump_config, load_config
from .errors import ConsistencyError, DomainError, FormatError, StabilityError
from .sim.simulator import SimConfig, run

logger = logging.getLogger("prionoc")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNSTABLE = 2
EXIT_MISMATCH = 3

SWEEP_HEADER = ("fraction_of_lambda_max", "analytical_mean", "sim_mean", "mape")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
    common.add_argument("--seed", type=int, help="simulation seed (overrides config)")
    common.add_argument("--jobs", type=int, default=1, metavar="N", help="worker processes for sweeps")
    common.add_argument("--dump-config", action="store_true",
                        help="print the effective configuration and exit")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="prionoc", description="Latency models and simulator for priority NoCs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("analyze", parents=[common], help="analytical per-pair latency -> analytical.csv")
    sub.add_parser("simulate", parents=[common], help="simulated per-pair latency -> simulated.csv")
    sub.add_parser("sweep", parents=[common], help="mean latency over lambda_max fractions -> sweep.csv")
    p = sub.add_parser("compare", parents=[common], help="per-pair MAPE of two reports -> comparison.csv")
    p.add_argument("analytical", help="report providing analytical_latency")
    p.add_argument("simulated", help="report providing sim_latency")
    return parser


def _effective_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, output=args.out)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, simulation=dataclasses.replace(cfg.simulation, seed=args.seed))
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_analyze(cfg: RunConfig) -> int:
    model = cfg.model()
    matrix = cfg.matrix(model)
    times = analyze(model, matrix, residual=cfg.analysis.residual, peers=cfg.analysis.peers)
    report = end_to_end(model, matrix, times)
    path = _out_dir(cfg) / "analytical.csv"
    report.write_csv(path)
    print(f"{len(report.pairs)} pairs, mean latency {report.weighted_mean(matrix):.4f} cycles -> {path}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    model = cfg.model()
    matrix = cfg.matrix(model)
    sim = cfg.simulation
    result = run(SimConfig(model, matrix, sim.cycles, sim.warmup, sim.seed))
    report = result.latency_report()
    path = _out_dir(cfg) / "simulated.csv"
    report.write_csv(path)
    if result.unstable_queues:
        names = ", ".join(model.queues[q].name for q in result.unstable_queues[:8])
        print(f"warning: unbounded growth in queue(s) {names}", file=sys.stderr)
    print(f"{len(report.pairs)} pairs, mean latency {result.mean_latency():.4f} cycles -> {path}")
    return EXIT_OK


def _sweep_point(cfg: RunConfig, fraction: float) -> tuple[float, float, float | None]:
    model = cfg.model()
    matrix = cfg.matrix_at(model, fraction)
    times = analyze(model, matrix, residual=cfg.analysis.residual, peers=cfg.analysis.peers)
    ana = end_to_end(model, matrix, times).weighted_mean(matrix)
    sim_mean = None
    if cfg.sweep.simulate:
        s = cfg.simulation
        sim_mean = run(SimConfig(model, matrix, s.cycles, s.warmup, s.seed)).mean_latency()
    return fraction, ana, sim_mean


def cmd_sweep(cfg: RunConfig, jobs: int = 1) -> int:
    fractions = list(cfg.sweep.fractions)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_point, [cfg] * len(fractions), fractions))
    else:
        rows = [_sweep_point(cfg, f) for f in fractions]
    path = _out_dir(cfg) / "sweep.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for fraction, ana, sim_mean in rows:
            mape = None
            if sim_mean is not None and sim_mean > 0 and not math.isnan(sim_mean):
                mape = 100.0 * abs(sim_mean - ana) / sim_mean
            w.writerow([f"{fraction:.6f}", f"{ana:.6f}", "" if sim_mean is None else f"{sim_mean:.6f}",
                        "" if mape is None else f"{mape:.6f}"])
            logger.info("fraction %.3f analytical %.4f sim %s", fraction, ana, sim_mean)
    print(f"{len(rows)} sweep points -> {path}")
    return EXIT_OK


def cmd_compare(cfg: RunConfig, analytical: str, simulated: str) -> int:
    a = read_report_csv(analytical)
    s = read_report_csv(simulated)
    try:
        result = compare(a, s)
    except ConsistencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    path = _out_dir(cfg) / "comparison.csv"
    result.report.write_csv(path)
    if result.excluded:
        print(f"excluded {len(result.excluded)} pair(s) with zero simulated latency", file=sys.stderr)
    print(f"mean MAPE {result.mean_mape:.4f}%  max MAPE {result.max_mape:.4f}% -> {path}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _effective_config(args)
        if args.dump_config:
            sys.stdout.write(dump_config(cfg))
            return EXIT_OK
        if args.jobs < 1:
            raise FormatError("--jobs must be >= 1")
        if args.command == "analyze":
            return cmd_analyze(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.jobs)
        return cmd_compare(cfg, args.analytical, args.simulated)
    except StabilityError as exc:
        print(f"unstable: {exc} (at {exc.where})", file=sys.stderr)
        return EXIT_UNSTABLE
    except (FormatError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
