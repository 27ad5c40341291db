"""Command-line front end.

Subcommands:
  run        execute a scenario, writing per-replication JSON logs, a
             per-batch metrics CSV, and a summary JSON
  summarize  recompute the summary from raw logs, verify it against the
             stored one, and print a per-batch table
  oracle     print the fully informed allocation and expected output for a
             scenario's truth
  report     render figures (PNG) from a run directory

Scenario arguments accept a file path or the name of a bundled scenario
(``hgtsim run k2_classroom``). The environment variable HGTSIM_OUT sets the
default output root (default ./runs). Exit codes: 0 success, 2 schema
violation, 3 infeasible scenario, 4 I/O failure, 1 unexpected error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path

from .matching import InfeasibleError
from .serialize import (
    SchemaError,
    build_summary,
    match_result_to_dict,
    metrics_csv,
    run_result_from_dict,
    run_result_to_dict,
    scenario_from_dict,
    scenario_to_dict,
)
from .simulate import ScenarioConfig, oracle_policy, run_scenario
from .wsbm import sample_types

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_SCHEMA = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4


def _fail(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def _resolve_scenario(arg: str) -> dict:
    path = Path(arg)
    if path.is_file():
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    name = arg[:-5] if arg.endswith(".json") else arg
    candidate = resources.files("hgtsim.scenarios").joinpath(f"{name}.json")
    if candidate.is_file():
        return json.loads(candidate.read_text(encoding="utf-8"))
    raise FileNotFoundError(f"scenario not found: {arg!r} (no such file or bundled scenario)")


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _out_root() -> Path:
    return Path(os.environ.get("HGTSIM_OUT", "runs"))


def cmd_run(args) -> int:
    try:
        doc = _resolve_scenario(args.scenario)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(EXIT_IO, "io", f"cannot read scenario: {exc}")
    try:
        config, extras = scenario_from_dict(doc)
        overrides = {}
        if args.seed is not None:
            overrides["master_seed"] = args.seed
        if args.replications is not None:
            overrides["replications"] = args.replications
        if overrides:
            from dataclasses import replace

            config = replace(config, **overrides)
    except SchemaError as exc:
        return _fail(EXIT_SCHEMA, "schema", str(exc))
    except ValueError as exc:
        return _fail(EXIT_SCHEMA, "schema", str(exc))

    out_dir = Path(args.out) if args.out else (
        Path(extras["out_dir"]) if extras.get("out_dir") else _out_root() / config.name
    )
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "replications").mkdir(exist_ok=True)
    except OSError as exc:
        return _fail(EXIT_IO, "io", f"cannot create output directory: {exc}")

    try:
        results = run_scenario(config, jobs=args.jobs)
    except InfeasibleError as exc:
        return _fail(EXIT_INFEASIBLE, "infeasible", str(exc))

    hard_failures = [r for r in results if r.error is not None]
    try:
        _atomic_write(out_dir / "run_config.json", _dump_json(scenario_to_dict(config, extras)))
        for res in results:
            _atomic_write(
                out_dir / "replications" / f"rep_{res.replication:04d}.json",
                _dump_json(run_result_to_dict(res)),
            )
        _atomic_write(out_dir / "metrics.csv", metrics_csv(results))
        _atomic_write(out_dir / "summary.json", _dump_json(build_summary(config, results)))
    except OSError as exc:
        return _fail(EXIT_IO, "io", f"cannot write outputs: {exc}")

    if hard_failures:
        print(f"completed with {len(hard_failures)} failed replications "
              f"(seeds {[r.replication for r in hard_failures]}); see logs", file=sys.stderr)
    print(f"wrote {len(results)} replication logs, metrics.csv, summary.json to {out_dir}")
    return EXIT_OK


def _load_run_dir(log_dir: Path):
    cfg_path = log_dir / "run_config.json"
    if not cfg_path.is_file():
        raise FileNotFoundError(f"missing run_config.json in {log_dir}")
    config, _ = scenario_from_dict(json.loads(cfg_path.read_text(encoding="utf-8")))
    rep_dir = log_dir / "replications"
    reps = sorted(rep_dir.glob("rep_*.json")) if rep_dir.is_dir() else []
    results = [
        run_result_from_dict(json.loads(p.read_text(encoding="utf-8")), config.n, config.k)
        for p in reps
    ]
    return config, results


def _print_summary_table(summary: dict) -> None:
    print(f"scenario: {summary['scenario']}   replications: {summary['completed']}"
          f"/{summary['replications']}")
    header = f"{'batch':>5} {'FLR%':>8} {'regret':>9} {'regret%':>9} {'output':>9} {'oracle':>9}"
    print(header)
    print("-" * len(header))
    for row in summary["per_batch"]:
        print(f"{row['batch']:>5} {100 * row['flr_mean']:>8.2f} {row['regret_abs_mean']:>9.2f} "
              f"{row['regret_pct_mean']:>9.2f} {row['hgt_expected_mean']:>9.2f} "
              f"{row['oracle_expected_mean']:>9.2f}")


def cmd_summarize(args) -> int:
    log_dir = Path(args.log_dir)
    try:
        config, results = _load_run_dir(log_dir)
    except (OSError, FileNotFoundError, json.JSONDecodeError, SchemaError) as exc:
        return _fail(EXIT_IO, "io", f"cannot load run directory: {exc}")
    if not results:
        return _fail(EXIT_IO, "io", f"no replication logs found in {log_dir}")
    partial = len(results) < config.replications
    if partial:
        print(f"warning: partial data ({len(results)} of {config.replications} "
              f"replication logs present)", file=sys.stderr)
    summary = build_summary(config, results)
    stored_path = log_dir / "summary.json"
    if stored_path.is_file() and not partial:
        stored = json.loads(stored_path.read_text(encoding="utf-8"))
        if stored != json.loads(_dump_json(summary)):
            return _fail(EXIT_UNEXPECTED, "mismatch",
                         "recomputed summary differs from stored summary.json")
    _print_summary_table(summary)
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        doc = _resolve_scenario(args.scenario)
        config, _ = scenario_from_dict(doc)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(EXIT_IO, "io", f"cannot read scenario: {exc}")
    except SchemaError as exc:
        return _fail(EXIT_SCHEMA, "schema", str(exc))
    import numpy as np

    # truth drawn once, matching replication 0's truth stream
    stream = np.random.SeedSequence(config.master_seed, spawn_key=(0,)).spawn(1)[0]
    z_true = sample_types(config.n, config.pi_true, np.random.default_rng(stream))
    try:
        result, expected = oracle_policy(config.theta_true, z_true, config.constraints)
    except InfeasibleError as exc:
        return _fail(EXIT_INFEASIBLE, "infeasible", str(exc))
    counts = z_true.counts()
    print(f"scenario: {config.name}")
    print(f"type counts: {[int(c) for c in counts]}")
    print(f"expected output: {expected:.4f} over {config.m_per_batch} tasks")
    print("allocation (cell: edges):")
    doc = match_result_to_dict(result)
    for cell, cnt in sorted(doc["allocation"].items()):
        print(f"  ({cell}): {cnt}")
    return EXIT_OK


def cmd_report(args) -> int:
    log_dir = Path(args.log_dir)
    try:
        config, results = _load_run_dir(log_dir)
        if not results:
            return _fail(EXIT_IO, "io", f"no replication logs found in {log_dir}")
        summary = build_summary(config, results)
        from .report import render_all

        out_dir = Path(args.out) if args.out else log_dir
        paths = render_all(summary, config.theta_true.values, out_dir)
    except (OSError, json.JSONDecodeError, SchemaError) as exc:
        return _fail(EXIT_IO, "io", f"cannot render report: {exc}")
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hgtsim", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario")
    p_run.add_argument("scenario", help="scenario file path or bundled scenario name")
    p_run.add_argument("--out", help="output directory (default $HGTSIM_OUT/<name>)")
    p_run.add_argument("--seed", type=int, help="override master seed")
    p_run.add_argument("--replications", type=int, help="override replication count")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel replication workers")
    p_run.set_defaults(fn=cmd_run)

    p_sum = sub.add_parser("summarize", help="recompute and print a run summary")
    p_sum.add_argument("log_dir", help="run output directory")
    p_sum.set_defaults(fn=cmd_summarize)

    p_or = sub.add_parser("oracle", help="print the fully informed benchmark")
    p_or.add_argument("scenario", help="scenario file path or bundled scenario name")
    p_or.set_defaults(fn=cmd_oracle)

    p_rep = sub.add_parser("report", help="render figures from a run directory")
    p_rep.add_argument("log_dir", help="run output directory")
    p_rep.add_argument("--out", help="directory for figures (default: the run directory)")
    p_rep.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        return _fail(EXIT_IO, "io", str(exc))
    except Exception as exc:  # noqa: BLE001 - last-resort machine-readable error
        return _fail(EXIT_UNEXPECTED, "unexpected", f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
