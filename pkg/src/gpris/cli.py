"""Command-line front end: run experiments, benchmark, validate configs."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .harness import bench_from_spec, load_spec, run_experiment, write_results
from .joint import AlgorithmSettings
from .scenario import load_scenario


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario rng seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for sweep points")
    parser.add_argument("--out", type=str, default=None,
                        help="output path stem (.csv / .jsonl are appended)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpris",
        description="Joint precoder / RIS phase optimization experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment spec")
    p_run.add_argument("spec", help="experiment spec JSON file")
    _add_common(p_run)

    p_bench = sub.add_parser("bench", help="time the RIS stage across configs")
    p_bench.add_argument("spec", help="experiment spec JSON file (kind=bench)")
    _add_common(p_bench)

    p_val = sub.add_parser("validate", help="check a scenario config file")
    p_val.add_argument("config", help="scenario config JSON file")
    return parser


def cmd_run(args) -> int:
    spec = load_spec(args.spec)
    rows = run_experiment(spec, AlgorithmSettings(), threads=max(1, args.threads),
                          base_seed=args.seed)
    out = args.out or spec.output_path
    csv_path, jsonl_path = write_results(rows, out)
    print(f"wrote {len(rows)} rows to {csv_path} and {jsonl_path}")
    failures = [r for r in rows if r.error]
    for row in failures:
        print(f"  failed: value={row.sweep_value} seed={row.seed} "
              f"scheme={row.scheme}: {row.error}", file=sys.stderr)
    # each sweep point must have at least one successful row
    ok_values = {r.sweep_value for r in rows if not r.error}
    missing = [v for v in spec.sweep_values if float(v) not in ok_values]
    if missing:
        print(f"no successful rows for sweep values {missing}", file=sys.stderr)
        return 1
    return 0


def cmd_bench(args) -> int:
    spec = load_spec(args.spec)
    if spec.kind != "bench":
        print(f"expected a bench spec, got kind={spec.kind!r}", file=sys.stderr)
        return 2
    if args.seed is not None:
        base = dict(spec.base_config)
        base["rng_seed"] = args.seed
        spec = type(spec)(**{**_spec_asdict(spec), "base_config": base})
    result = bench_from_spec(spec)
    report = {
        "rows": [vars(r) for r in result.rows],
        "loglog_slope": result.loglog_slope,
    }
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out + ".json", "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(f"wrote bench report to {args.out}.json")
    else:
        print(text)
    return 0


def _spec_asdict(spec) -> dict:
    import dataclasses
    return dataclasses.asdict(spec)


def cmd_validate(args) -> int:
    if not os.path.exists(args.config):
        print(f"no such file: {args.config}", file=sys.stderr)
        return 2
    try:
        scenario = load_scenario(args.config)
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    cfg = scenario.config
    print(f"valid: N={cfg.n_bs_antennas} K={cfg.n_users} L={cfg.n_ris} "
          f"M={cfg.m_ris} P={cfg.tx_power_dbm}dBm T_UL={cfg.ul_train_len}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": cmd_run, "bench": cmd_bench, "validate": cmd_validate}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
