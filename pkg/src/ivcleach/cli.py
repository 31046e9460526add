"""Command-line entry point: ``ivcleach run | compare | chart``.

Exit codes: 0 success, 1 configuration error, 2 runtime or I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .core import ConfigError, Protocol
from .engine import compare, run
from .reporting import (
    emit_charts,
    load_config,
    read_rounds_csv,
    write_events,
    write_manifest,
    write_rounds_csv,
    write_summary,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("ivcleach")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parse_seeds(text: str) -> list[int]:
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise ConfigError("seeds", "empty seed list")
    return seeds


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="flat key = value config file")
    p.add_argument("--rounds", type=int, dest="max_rounds", help="maximum number of rounds")
    p.add_argument("--nodes", type=int, dest="n_nodes", help="number of sensor nodes")
    p.add_argument("--area", metavar="WxH", help="field size in metres, e.g. 100x100")
    p.add_argument("--bs", metavar="X,Y", help="base station position")
    p.add_argument("--k-clusters", type=int, dest="k_clusters", help="IVC cluster count")
    p.add_argument("--leach-p", type=float, dest="leach_p", help="LEACH CH probability")
    p.add_argument("--fail-prob", type=float, dest="fail_prob",
                   help="per-node per-round failure probability")
    p.add_argument("--kill", action="append", metavar="ROUND:NODE[:SLOT]",
                   help="scripted node failure (repeatable)")
    p.add_argument("--out", metavar="DIR", default="out", help="output directory")
    p.add_argument("--charts", action="store_true", help="also write SVG charts")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ivcleach", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="simulate one protocol for one seed")
    _add_sim_flags(p_run)
    p_run.add_argument("--protocol", choices=[p.value for p in Protocol], type=str.upper)
    p_run.add_argument("--seed", type=int)

    p_cmp = sub.add_parser("compare", help="paired LEACH vs IVC runs over a seed list")
    _add_sim_flags(p_cmp)
    p_cmp.add_argument("--seeds", default="0-9", help="e.g. 0-9 or 1,4,7")
    p_cmp.add_argument("--workers", type=int, default=1, help="parallel worker processes")

    p_chart = sub.add_parser("chart", help="render charts from existing rounds CSVs")
    p_chart.add_argument("csv", nargs="+", help="rounds CSV files")
    p_chart.add_argument("--labels", help="comma-separated series labels")
    p_chart.add_argument("--out", metavar="DIR", default="out")
    return parser


def _overrides(args) -> dict:
    ov = {
        "max_rounds": args.max_rounds,
        "n_nodes": args.n_nodes,
        "k_clusters": args.k_clusters,
        "leach_p": args.leach_p,
        "fail_prob": args.fail_prob,
    }
    if getattr(args, "protocol", None):
        ov["protocol"] = args.protocol
    if getattr(args, "seed", None) is not None:
        ov["seed"] = args.seed
    if args.area:
        w, _, h = args.area.lower().partition("x")
        ov["area_width"], ov["area_height"] = w, h
    if args.bs:
        x, _, y = args.bs.partition(",")
        ov["bs_x"], ov["bs_y"] = x, y
    if args.kill:
        ov["kill"] = ",".join(args.kill)
    return {k: (v if isinstance(v, str) or v is None else str(v)) for k, v in ov.items()}


def _cmd_run(args) -> int:
    config = load_config(args.config, _overrides(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = ["rounds.csv", "summary.txt", "events.csv"]
    write_manifest(config, out / "manifest.txt", names)
    result = run(config)
    write_rounds_csv(result, out / "rounds.csv")
    write_summary(result, out / "summary.txt")
    write_events(result, out / "events.csv")
    if args.charts:
        emit_charts({config.protocol.value: result}, out)
    print(f"{config.protocol.value} seed={config.seed}: rounds={result.rounds} "
          f"fnd={result.fnd} hnd={result.hnd} lnd={result.lnd} -> {out}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    config = load_config(args.config, _overrides(args))
    seeds = _parse_seeds(args.seeds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(config, out / "manifest.txt", ["summary.txt", "seed_*/"])
    report, pairs = compare(config, seeds, workers=args.workers, keep_results=True)
    for seed, results in zip(seeds, pairs):
        seed_dir = out / f"seed_{seed}"
        seed_dir.mkdir(exist_ok=True)
        for result in results:
            name = result.config.protocol.value.lower()
            write_rounds_csv(result, seed_dir / f"{name}_rounds.csv")
            write_events(result, seed_dir / f"{name}_events.csv")
            write_summary(result, seed_dir / f"{name}_summary.txt")
        if args.charts:
            emit_charts({r.config.protocol.value: r for r in results}, seed_dir)
    write_summary(report, out / "summary.txt")
    ratio = report.mean_ratio
    print(f"seeds={len(seeds)} mean LND ratio IVC/LEACH="
          f"{'n/a' if ratio is None else f'{ratio:.3f}'} -> {out}")
    return EXIT_OK


def _cmd_chart(args) -> int:
    labels = args.labels.split(",") if args.labels else [Path(p).stem for p in args.csv]
    if len(labels) != len(args.csv):
        raise ConfigError("labels", f"expected {len(args.csv)} labels, got {len(labels)}")
    series = {}
    for label, path in zip(labels, args.csv):
        try:
            series[label] = read_rounds_csv(path)
        except ValueError as exc:
            raise ConfigError("csv", str(exc)) from None
    for path in emit_charts(series, args.out):
        print(path)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "compare": _cmd_compare, "chart": _cmd_chart}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, RuntimeError, ValueError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
