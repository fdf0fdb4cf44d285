"""Command-line entry point: ``ebsched <command> ...``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import replace

from .bench import HEURISTICS, PRESETS, ConfigError, load_config, preset, run_experiment, worker_count
from .common import schedule_scsb2
from .model import GenerationParams, Instance, generate_instance
from .multi import schedule_mcmb, schedule_mcsb, schedule_scmb
from .oracle import OracleLimitError, OracleLimits, export_ilp, solve_exact, solve_milp
from .plots import CsvFormatError, emit_plots
from .scsb import ENERGY_MODES, PER_PAIR, schedule_scsb1


def _write(text: str, out: str | None) -> None:
    if out:
        d = os.path.dirname(out)
        if d:
            os.makedirs(d, exist_ok=True)
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_instance(path: str) -> Instance:
    with open(path) as fh:
        return Instance.from_json(fh.read())


def _algorithms(raw: str | None, default: list[str]) -> list[str]:
    if not raw:
        return default
    return [a.strip().upper() for a in raw.split(",") if a.strip()]


def cmd_generate(a) -> int:
    doc = {}
    if a.config:
        with open(a.config) as fh:
            doc = json.load(fh)
    dims = doc.pop("dims", None) or [a.users, a.bs, a.channels, a.slots]
    if "size_range" in doc:
        doc["size_range"] = tuple(doc["size_range"])
    if a.lam is not None:
        doc["poisson_rate"] = a.lam
    p = GenerationParams(**doc)
    seed = a.seed if a.seed is not None else p.seed
    inst = generate_instance(replace(p, seed=seed), tuple(int(x) for x in dims))
    _write(json.dumps(inst.to_dict(), indent=1) + "\n", a.out)
    return 0


def cmd_solve(a) -> int:
    inst = _load_instance(a.instance)
    mode = a.energy_per_slot_mode
    runners = {
        "SCSB1": lambda: schedule_scsb1(inst, a.bs).to_dict(),
        "SCSB2": lambda: schedule_scsb2(inst, a.bs).to_dict(),
        "MCSB": lambda: schedule_mcsb(inst, a.bs, energy_mode=mode).to_dict(),
        "SCMB": lambda: schedule_scmb(inst).to_dict(),
        "MCMB": lambda: schedule_mcmb(inst, energy_mode=mode).to_dict(),
    }
    algs = _algorithms(a.algorithms, ["MCMB"])
    bad = [x for x in algs if x not in runners]
    if bad:
        raise ConfigError(f"unknown algorithms {bad}; choose from {HEURISTICS}")
    result = {x: runners[x]() for x in algs}
    _write(json.dumps(result, indent=1) + "\n", a.out)
    return 0


def cmd_oracle(a) -> int:
    inst = _load_instance(a.instance)
    if a.milp:
        doc = {"optimum": solve_milp(inst, a.time_limit), "method": "milp"}
    else:
        res = solve_exact(inst, OracleLimits(max_nodes=a.max_nodes))
        doc = {"optimum": res.optimum, "method": "branch-and-bound", "nodes": res.nodes,
               "assignment": {str(u): [b + 1, c + 1] for u, (b, c) in sorted(res.assignment.items())},
               "bs": {str(b + 1): o.to_dict() for b, o in sorted(res.per_bs.items())}}
    _write(json.dumps(doc, indent=1) + "\n", a.out)
    return 0


def cmd_export_ilp(a) -> int:
    _write(export_ilp(_load_instance(a.instance)), a.out)
    return 0


def cmd_bench(a) -> int:
    if a.config:
        cfgs = load_config(a.config)
    else:
        figs = a.figures.split(",") if a.figures else list(PRESETS)
        cfgs = [preset(f.strip()) for f in figs]
    out = a.out or "results"
    os.makedirs(out, exist_ok=True)
    for cfg in cfgs:
        over = {"energy_mode": a.energy_per_slot_mode}
        if a.seed is not None:
            over["seed"] = a.seed
        if a.realizations is not None:
            over["realizations"] = a.realizations
        if a.algorithms:
            over["algorithms"] = _algorithms(a.algorithms, cfg.algorithms)
        if a.no_timing:
            over["timing"] = False
        cfg = replace(cfg, **over)
        cfg.out_csv = os.path.join(out, f"{cfg.figure}.csv")
        text = run_experiment(cfg, worker_count())
        paths = [] if a.no_plots else emit_plots(text, out, a.format)
        print(f"{cfg.figure}: {cfg.out_csv}" + "".join(f" {p}" for p in paths))
    return 0


def cmd_plot(a) -> int:
    with open(a.csv) as fh:
        text = fh.read()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        paths = emit_plots(text, a.out or os.path.dirname(os.path.abspath(a.csv)), a.format)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    for p in paths:
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ebsched", description="User scheduling and association for energy-harvesting BSs.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, instance=True):
        if instance:
            p.add_argument("instance", help="instance JSON file")
        p.add_argument("--out", help="output path (stdout if omitted)")
        p.add_argument("--energy-per-slot-mode", choices=ENERGY_MODES, default=PER_PAIR,
                       help="charge energy per active (slot, channel) pair or per active slot")

    g = sub.add_parser("generate", help="draw a random instance")
    g.add_argument("--config", help="JSON of generation parameters (optionally with 'dims': [U,B,C,T])")
    g.add_argument("--seed", type=int)
    g.add_argument("--users", "-U", type=int, default=10)
    g.add_argument("--bs", "-B", type=int, default=1)
    g.add_argument("--channels", "-C", type=int, default=1)
    g.add_argument("--slots", "-T", type=int, default=10)
    g.add_argument("--lam", type=float)
    g.add_argument("--out")
    g.set_defaults(fn=cmd_generate)

    s = sub.add_parser("solve", help="run heuristics on an instance")
    common(s)
    s.add_argument("--algorithms", help=f"comma list from {','.join(HEURISTICS)} (default MCMB)")
    s.add_argument("--bs", type=int, default=0, help="BS index for single-BS algorithms (0-based)")
    s.set_defaults(fn=cmd_solve)

    o = sub.add_parser("oracle", help="exact optimum of a small instance")
    common(o)
    o.add_argument("--milp", action="store_true", help="use the HiGHS integer program instead of branch and bound")
    o.add_argument("--max-nodes", type=int, default=OracleLimits().max_nodes)
    o.add_argument("--time-limit", type=float)
    o.set_defaults(fn=cmd_oracle)

    e = sub.add_parser("export-ilp", help="write the integer program in LP format")
    common(e)
    e.set_defaults(fn=cmd_export_ilp)

    b = sub.add_parser("bench", help="Monte-Carlo sweeps to CSV and figures")
    common(b, instance=False)
    b.add_argument("--config", help="JSON experiment config (object or list)")
    b.add_argument("--figures", help=f"comma list of presets from {','.join(PRESETS)}")
    b.add_argument("--seed", type=int)
    b.add_argument("--realizations", type=int)
    b.add_argument("--algorithms")
    b.add_argument("--format", default="svg", choices=("svg", "png", "pdf"))
    b.add_argument("--no-plots", action="store_true")
    b.add_argument("--no-timing", action="store_true", help="leave wall_ms empty so output is byte-reproducible")
    b.set_defaults(fn=cmd_bench)

    p = sub.add_parser("plot", help="render figures from a bench CSV")
    p.add_argument("csv")
    p.add_argument("--out", help="output directory (default: next to the CSV)")
    p.add_argument("--format", default="svg", choices=("svg", "png", "pdf"))
    p.set_defaults(fn=cmd_plot)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, OracleLimitError, CsvFormatError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
