"""Command-line front end: ``run``, ``sweep`` and ``report``."""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from .config import FIELDS, ConfigError, RunConfig, _coerce, load
from .metrics import METRICS_HEADER, MetricsReport, read_metrics
from .sim import Simulation, output_root
from .topology import InfeasibleRange

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

SWEEP_PARAMS = {
    "interest_rate": "interest_rate",
    "unique_objects": "unique_objects",
    "node_count": "nodes",
    "ch_in_range": "ch_in_range",
}

# columns compared by ``report``; lower is better for all but the ratios
REPORT_METRICS = ("energy_interest_J", "energy_data_J", "energy_total_J", "isd_mean_s",
                  "qsd_mean_s", "interest_frames", "data_frames", "isr", "qsr")

log = logging.getLogger("ccicwsn")


class UnknownParameter(ValueError):
    pass


class MismatchedRuns(ValueError):
    pass


def _overrides(cfg: RunConfig, pairs: Sequence[str]) -> RunConfig:
    kw = {}
    for pair in pairs:
        key, sep, raw = pair.partition("=")
        key = key.strip()
        if not sep or key not in FIELDS:
            raise ConfigError(f"bad override {pair!r}: unknown key {key!r}")
        try:
            kw[key] = _coerce(FIELDS[key], raw)
        except ValueError as e:
            raise ConfigError(f"{key}: {e}") from None
    return cfg.replace(**kw) if kw else cfg


def _base_config(args) -> RunConfig:
    cfg = load(args.config) if args.config else RunConfig()
    cfg = _overrides(cfg, args.set or [])
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def run_dir_for(cfg: RunConfig, topology_id: str) -> Path:
    if cfg.output_dir:
        return Path(cfg.output_dir)
    return output_root() / f"{cfg.strategy}-seed{cfg.seed}-{topology_id}"


def cmd_run(args) -> int:
    cfg = _base_config(args)
    sim = Simulation(cfg)
    result = sim.run()
    out = Path(args.out) if args.out else run_dir_for(cfg, sim.topology.fingerprint())
    sim.write(out, result.metrics)
    m = result.metrics
    print(f"{out}: energy {m.energy_total_J:.6f} J "
          f"(Interest {m.energy_interest_J:.6f}, Data {m.energy_data_J:.6f}), "
          f"ISR {_pct(m.isr)}, frames {m.interest_frames}+{m.data_frames}")
    return EXIT_OK


def _pct(v: Optional[float]) -> str:
    return "-" if v is None else f"{100 * v:.1f}%"


def _one(job: tuple[RunConfig, str, object]) -> tuple[str, object, str, int, MetricsReport]:
    cfg, param, value = job
    return param, value, cfg.strategy, cfg.seed, Simulation(cfg).run().metrics


def sweep_jobs(cfg: RunConfig, param: str, values: Sequence[str], strategies: Sequence[str],
               seeds: Sequence[int]) -> list[tuple[RunConfig, str, object]]:
    if param not in SWEEP_PARAMS:
        raise UnknownParameter(f"cannot sweep {param!r}; choose from {', '.join(SWEEP_PARAMS)}")
    key = SWEEP_PARAMS[param]
    jobs = []
    for raw in values:
        value = _coerce(FIELDS[key], raw)
        for strategy in strategies:
            for seed in seeds:
                jobs.append((cfg.replace(**{key: value, "strategy": strategy, "seed": seed}),
                             param, value))
    return jobs


def sweep(cfg: RunConfig, param: str, values: Sequence[str], strategies: Sequence[str],
          seeds: Sequence[int], jobs: int = 1) -> str:
    """Run the grid and return ``sweep.csv`` text, ordered by value then
    strategy then seed regardless of completion order."""
    work = sweep_jobs(cfg, param, values, strategies, seeds)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_one, work))
    else:
        results = [_one(j) for j in work]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("parameter", "value") + METRICS_HEADER)
    for param_, value, _, _, rep in results:
        w.writerow([param_, value] + rep.row())
    return buf.getvalue()


def cmd_sweep(args) -> int:
    cfg = _base_config(args)
    values = [v for v in args.values.split(",") if v.strip()]
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    text = sweep(cfg, args.param, values, strategies, seeds, args.jobs)
    out = Path(args.out) if args.out else output_root() / f"sweep-{args.param}"
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(text)
    print(f"{out / 'sweep.csv'}: {len(values) * len(strategies) * len(seeds)} runs")
    return EXIT_OK


def compare(rows: list[dict[str, str]]) -> list[list[str]]:
    """Percentage reduction of every run relative to the vanilla baseline
    (or the first run when none is vanilla)."""
    if len(rows) < 2:
        raise MismatchedRuns("report needs at least two runs")
    keys = {(r["topology_id"], r["seed"]) for r in rows}
    if len(keys) != 1:
        raise MismatchedRuns(f"runs do not share topology and seed: {sorted(keys)}")
    base = next((r for r in rows if r["strategy"] == "vanilla"), rows[0])
    table = [["strategy"] + [f"{m}" for m in REPORT_METRICS]
             + [f"{m}_reduction_pct" for m in REPORT_METRICS]]
    for r in rows:
        vals, deltas = [], []
        for m in REPORT_METRICS:
            vals.append(r[m])
            b, v = base[m], r[m]
            if b in ("", None) or v in ("", None) or float(b) == 0:
                deltas.append("")
            else:
                deltas.append(f"{100 * (float(b) - float(v)) / float(b):.2f}")
        table.append([r["strategy"]] + vals + deltas)
    return table


def cmd_report(args) -> int:
    rows = []
    for d in args.runs:
        path = Path(d) / "metrics.csv" if Path(d).is_dir() else Path(d)
        rows.extend(read_metrics(path))
    table = compare(rows)
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(table)
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    width = max(len(c) for c in table[0])
    n = len(REPORT_METRICS)
    for i, m in enumerate(REPORT_METRICS):
        cells = "  ".join(f"{row[1 + i]:>12} ({row[1 + n + i] or '-':>7}%)" for row in table[1:])
        print(f"{m:<{width}}  {cells}")
    print("runs: " + ", ".join(row[0] for row in table[1:]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ccicwsn", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", nargs="?", help="INI config file (defaults if omitted)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config key; repeatable")
        sp.add_argument("--out", help="output directory")

    r = sub.add_parser("run", help="run one simulation")
    common(r)
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="sweep one parameter over strategies and seeds")
    common(s)
    s.add_argument("--param", required=True, help=", ".join(SWEEP_PARAMS))
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--strategies", default="ccic,vanilla")
    s.add_argument("--seeds", default="1")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    rp = sub.add_parser("report", help="compare runs against the vanilla baseline")
    rp.add_argument("runs", nargs="+", help="run directories or metrics.csv files")
    rp.add_argument("--out", help="write the comparison table as CSV")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UnknownParameter) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (MismatchedRuns, InfeasibleRange, ValueError, OSError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
