"""Command-line front end.

Verbs:
    design    emit the request-probability / sparsity / measurements table
    simulate  run one scenario and emit its metrics
    sweep     run a one-parameter sweep and emit rows plus aggregates

All verbs honor --config (flat key-value file), --output (default stdout),
and --format {csv,jsonl}. Exit code 0 on success, 2 on any error with a
one-line diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict, replace

from .scenario_io import (
    SCHEMA_VERSION,
    SweepSpec,
    emit_design_table,
    format_records,
    parse_config,
    run_sweep,
    seed_for,
)
from .simulate import SCHEMES, SystemConfig, run_scenario


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsemac",
        description="Buffer-state multiple-access design and simulation",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--output", help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "jsonl"), default="csv")

    p = sub.add_parser("design", parents=[common],
                       help="request probability vs sparsity and measurements")
    p.add_argument("--alphas", default="0.01:0.20:0.01",
                   help="grid as start:stop:step or comma list")
    p.add_argument("--trials", type=int, default=1000,
                   help="Monte Carlo trials per calibration point")
    p.add_argument("--seeds", type=int, default=1,
                   help="accepted for interface symmetry; table uses one seed")

    p = sub.add_parser("simulate", parents=[common], help="run one scenario")
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--frames", type=int, default=1000)
    p.add_argument("--seeds", type=int, default=1,
                   help="number of independent seeds to run")

    p = sub.add_parser("sweep", parents=[common], help="one-parameter sweep")
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--param", required=True,
                   help="arrival_rate|frame_duration|request_prob|n_slots|bandwidth")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--frames", type=int, default=1000)
    p.add_argument("--seeds", type=int, default=1)
    return parser


def _load_config(args) -> SystemConfig:
    cfg = parse_config(args.config) if args.config else SystemConfig()
    if getattr(args, "scheme", None):
        cfg = replace(cfg, scheme=args.scheme)
    return cfg


def _parse_grid(text: str):
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        n = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 12) for i in range(n)]
    return [float(v) for v in text.split(",")]


def _emit(records, args) -> None:
    rendered = format_records(records, args.format)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(rendered)
    else:
        sys.stdout.write(rendered)


def _cmd_design(args) -> None:
    cfg = _load_config(args)
    rows = emit_design_table(cfg.n_users, cfg.epsilon, _parse_grid(args.alphas),
                             trials=args.trials, seed=cfg.seed)
    _emit(rows, args)


def _cmd_simulate(args) -> None:
    cfg = _load_config(args)
    records = []
    for si in range(args.seeds):
        seed = cfg.seed if args.seeds == 1 else seed_for(cfg.seed, 0, si)
        summary = run_scenario(replace(cfg, seed=seed), args.frames)
        rec = {"schema_version": SCHEMA_VERSION, "scheme": cfg.scheme,
               "seed": seed}
        rec.update(asdict(summary))
        records.append(rec)
    _emit(records, args)


def _cmd_sweep(args) -> None:
    cfg = _load_config(args)
    spec = SweepSpec(
        parameter=args.param.lower(),
        values=tuple(_parse_grid(args.values)),
        base=cfg,
        n_frames=args.frames,
        n_seeds=args.seeds,
        base_seed=cfg.seed,
    )
    _emit(run_sweep(spec), args)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        {"design": _cmd_design, "simulate": _cmd_simulate,
         "sweep": _cmd_sweep}[args.verb](args)
    except Exception as exc:  # noqa: BLE001 - single-line CLI diagnostic
        print(f"sparsemac: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
