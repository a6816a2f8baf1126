"""Command-line front end: ``partx run | evaluate | oracle``.

A run reads an optional YAML config, executes seeded macro-replications and
writes one leaf dump per replication, a one-row summary table and a JSON
manifest into the output directory.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import shlex
import subprocess
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path
from typing import Optional

import numpy as np
import scipy
import yaml

from . import __version__
from .bench import PROBLEMS, get_problem, mc_volume_oracle
from .core import PartXConfig, RunReport, config_dict, evaluate_samples, part_x
from .exceptions import ConfigInvalid, EvaluationError, MalformedRow, PointOutsideDomain
from .hyperbox import Hyperbox
from .partition import leaf_records

EXIT_OK, EXIT_CONFIG, EXIT_EVALUATION = 0, 2, 3

TOP_KEYS = {"problem", "command", "domain", "out", "jobs", "partx"}
PARTX_KEYS = {f.name for f in fields(PartXConfig)}
DEFAULT_OUT = "partx_out"


def fmt(v) -> str:
    """Round-trip decimal text; empty for missing values."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


class ExternalObjective:
    """One process per evaluation: the point goes to stdin, a single number comes back on stdout."""

    def __init__(self, command, timeout: Optional[float] = None):
        self.command = shlex.split(command) if isinstance(command, str) else [str(c) for c in command]
        if not self.command:
            raise ConfigInvalid("command must not be empty")
        self.timeout = timeout

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        payload = " ".join(repr(float(v)) for v in x) + "\n"
        try:
            proc = subprocess.run(self.command, input=payload, capture_output=True, text=True,
                                  timeout=self.timeout, check=False)
        except (OSError, subprocess.SubprocessError) as exc:
            raise EvaluationError(x, f"could not run {self.command[0]!r}: {exc}") from exc
        if proc.returncode != 0:
            raise EvaluationError(x, f"{self.command[0]!r} exited with status {proc.returncode}: "
                                     f"{proc.stderr.strip()[:200]}")
        try:
            value = float(proc.stdout.strip())
        except ValueError:
            raise EvaluationError(x, f"unparseable objective output {proc.stdout.strip()[:80]!r}") from None
        return value


# ---------------------------------------------------------------- config

def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"config {path} is not valid YAML: {exc}") from exc
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigInvalid("config must be a mapping")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
    section = raw.get("partx") or {}
    if not isinstance(section, dict):
        raise ConfigInvalid("'partx' must be a mapping")
    unknown = set(section) - PARTX_KEYS
    if unknown:
        raise ConfigInvalid(f"unknown partx keys: {sorted(unknown)}")
    return raw


def resolve(args: argparse.Namespace) -> dict:
    """Merge config file and command-line flags into one validated run description."""
    raw = load_config(args.config)
    section = dict(raw.get("partx") or {})
    if getattr(args, "seed", None) is not None:
        section["seed"] = args.seed
    if getattr(args, "macro_reps", None) is not None:
        section["macro_reps"] = args.macro_reps
    if "quantile_levels" in section:
        section["quantile_levels"] = tuple(section["quantile_levels"])
    try:
        cfg = PartXConfig(**section).validate()
    except TypeError as exc:
        raise ConfigInvalid(str(exc)) from exc

    problem = args.problem or raw.get("problem")
    command = raw.get("command")
    if problem is not None and command is not None and args.problem is None:
        raise ConfigInvalid("give either 'problem' or 'command', not both")
    if args.problem is not None:
        command = None
    domain = raw.get("domain")
    if command is not None:
        if domain is None:
            raise ConfigInvalid("an external command needs 'domain' bounds")
    elif problem is None:
        raise ConfigInvalid("no objective: set --problem, or 'problem' / 'command' in the config")
    elif problem not in PROBLEMS:
        raise ConfigInvalid(f"unknown problem {problem!r}; choose from {sorted(PROBLEMS)}")
    if domain is not None:
        try:
            box = Hyperbox.from_bounds(domain)
        except Exception as exc:  # noqa: BLE001 - any malformed bounds are a config error
            raise ConfigInvalid(f"bad domain {domain!r}: {exc}") from exc
        domain = [[float(lo), float(hi)] for lo, hi in zip(box.lower, box.upper)]
    else:
        p = get_problem(problem)
        domain = [[float(lo), float(hi)] for lo, hi in zip(p.domain.lower, p.domain.upper)]

    jobs = args.jobs if getattr(args, "jobs", None) is not None else raw.get("jobs", 1)
    if isinstance(jobs, bool) or not isinstance(jobs, int) or jobs < 1:
        raise ConfigInvalid(f"jobs must be a positive integer, got {jobs!r}")
    out = args.out or raw.get("out") or DEFAULT_OUT
    return {"config": cfg, "problem": None if command is not None else problem, "command": command,
            "domain": domain, "jobs": jobs, "out": Path(out)}


def make_objective(run: dict):
    if run["command"] is not None:
        return ExternalObjective(run["command"])
    return get_problem(run["problem"]).objective


# ---------------------------------------------------------------- outputs

def leaf_rows(report: RunReport) -> tuple[list[str], list[list[str]]]:
    d = report.domain.dim
    header = ([f"lower_{i + 1}" for i in range(d)] + [f"upper_{i + 1}" for i in range(d)]
              + ["label", "level", "birth_iteration", "n_samples", "q_min_mean", "q_max_mean"])
    rows = []
    for rec in leaf_records(report.tree):
        rows.append([fmt(v) for v in rec["lower"]] + [fmt(v) for v in rec["upper"]]
                    + [rec["label"], fmt(rec["level"]), fmt(rec["birth_iteration"]), fmt(rec["n_samples"]),
                       fmt(rec["q_min_mean"]), fmt(rec["q_max_mean"])])
    return header, rows


def write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def replication_record(report: RunReport, seed: int) -> dict:
    rec = {
        "seed": seed,
        "completed": report.completed,
        "evaluations": report.evaluations,
        "iterations": report.iterations,
        "hyperbox_volume": report.volume.hyperbox_volume,
        "violating_volume": report.volume.violating_volume,
    }
    for q, v in report.volume.gp_quantile_volume.items():
        rec[f"quantile_volume_{q:g}"] = v
    rec["min_robustness"] = report.best_value if math.isfinite(report.best_value) else None
    rec["falsified"] = bool(math.isfinite(report.best_value) and report.best_value < 0)
    return rec


def _mean_se(values) -> tuple[float, float]:
    a = np.asarray([v for v in values if v is not None], dtype=float)
    if a.size == 0:
        return math.nan, math.nan
    se = float(a.std(ddof=1) / math.sqrt(a.size)) if a.size > 1 else math.nan
    return float(a.mean()), se


def summary_row(name: str, records: list[dict], levels) -> tuple[list[str], list[str]]:
    header = ["problem", "macro_reps"]
    row = [name, fmt(len(records))]
    keys = ["hyperbox_volume"] + [f"quantile_volume_{q:g}" for q in levels]
    for key in keys:
        m, s = _mean_se([r[key] for r in records])
        header += [f"{key}_mean", f"{key}_se"]
        row += [fmt(m), fmt(s)]
    header.append("falsification_rate")
    row.append(fmt(float(np.mean([r["falsified"] for r in records]))))
    m, s = _mean_se([r["min_robustness"] for r in records])
    header += ["min_robustness_mean", "min_robustness_se"]
    row += [fmt(m), fmt(s)]
    return header, row


def write_outputs(out: Path, name: str, cfg: PartXConfig, results: list[tuple[int, RunReport, Optional[str]]],
                  manifest_extra: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for rep, (seed, report, error) in enumerate(results):
        header, rows = leaf_rows(report)
        write_csv(out / f"leaves_rep{rep:03d}.csv", header, rows)
        rec = replication_record(report, seed)
        rec["error"] = error
        records.append(rec)
    cols = list(records[0])
    write_csv(out / "replications.csv", cols, [[r[c] if isinstance(r[c], str) else fmt(r[c]) for c in cols]
                                               for r in records])
    header, row = summary_row(name, records, cfg.quantile_levels)
    write_csv(out / "summary.csv", header, [row])
    manifest = {
        "partx_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "config": config_dict(cfg),
        "seeds": [seed for seed, _, _ in results],
        "complete": all(r["completed"] for r in records),
        "replications": [{"seed": r["seed"], "completed": r["completed"], "evaluations": r["evaluations"],
                          "error": r["error"], "leaves": f"leaves_rep{i:03d}.csv"}
                         for i, r in enumerate(records)],
        **manifest_extra,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------- verbs

def _replicate(run: dict, seed: int) -> tuple[int, RunReport, Optional[str]]:
    cfg = PartXConfig(**{**config_dict(run["config"]), "seed": seed,
                         "quantile_levels": tuple(run["config"].quantile_levels)})
    domain = Hyperbox.from_bounds(run["domain"])
    try:
        return seed, part_x(make_objective(run), domain, cfg), None
    except EvaluationError as exc:
        return seed, exc.report, str(exc)


def cmd_run(args) -> int:
    run = resolve(args)
    cfg = run["config"]
    seeds = [cfg.seed + i for i in range(cfg.macro_reps)]
    if run["jobs"] > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(run["jobs"], len(seeds))) as pool:
            results = list(pool.map(_replicate, [run] * len(seeds), seeds))
    else:
        results = [_replicate(run, s) for s in seeds]
    name = run["problem"] or "external"
    write_outputs(run["out"], name, cfg, results,
                  {"mode": "run", "problem": run["problem"], "command": run["command"], "domain": run["domain"]})
    errors = [e for _, _, e in results if e]
    for e in errors:
        print(f"evaluation error: {e}", file=sys.stderr)
    print(f"wrote {len(results)} replication(s) to {run['out']}")
    return EXIT_EVALUATION if errors else EXIT_OK


def read_samples(path: str, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows of ``x_1..x_d,value``; a non-numeric first row is taken as a header."""
    with open(path, newline="") as fh:
        text = fh.read()
    points, values = [], []
    index = 0
    for lineno, row in enumerate(csv.reader(io.StringIO(text))):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            nums = [float(c) for c in row]
        except ValueError:
            if lineno == 0:
                continue
            raise MalformedRow(index, f"row {index}: non-numeric field in {row!r}") from None
        if len(nums) != dim + 1:
            raise MalformedRow(index, f"row {index}: expected {dim + 1} fields, got {len(nums)}")
        if not all(math.isfinite(v) for v in nums):
            raise MalformedRow(index, f"row {index}: non-finite field in {row!r}")
        points.append(nums[:dim])
        values.append(nums[dim])
        index += 1
    return np.asarray(points, dtype=float).reshape(-1, dim), np.asarray(values, dtype=float)


def cmd_evaluate(args) -> int:
    run = resolve(args)
    cfg = run["config"]
    domain = Hyperbox.from_bounds(run["domain"])
    try:
        x, y = read_samples(args.samples, domain.dim)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read samples {args.samples}: {exc}") from exc
    report = evaluate_samples(x, y, domain, cfg)
    write_outputs(run["out"], run["problem"] or "external", cfg, [(cfg.seed, report, None)],
                  {"mode": "evaluate", "samples": str(args.samples), "n_samples": int(len(y)),
                   "problem": run["problem"], "command": run["command"], "domain": run["domain"]})
    print(f"classified {len(y)} samples into {len(report.tree.leaves)} leaves; wrote {run['out']}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    if args.samples < 1:
        raise ConfigInvalid("--samples must be >= 1")
    names = [args.problem] if args.problem else sorted(PROBLEMS)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["problem", "samples", "seed", "estimate", "std_err", "reference"])
    for name in names:
        if name not in PROBLEMS:
            raise ConfigInvalid(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}")
        p = PROBLEMS[name]
        est, se = mc_volume_oracle(p, args.samples, np.random.default_rng(args.seed))
        w.writerow([name, args.samples, args.seed, fmt(est), fmt(se), fmt(p.reference_negative_volume)])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="partx", description="Partition-based falsification volume estimation")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", help="YAML run config")
        p.add_argument("--problem", help=f"benchmark name: {', '.join(sorted(PROBLEMS))}")
        p.add_argument("--seed", type=int, help="base seed; replication i uses seed+i")
        p.add_argument("--out", help=f"output directory (default {DEFAULT_OUT})")

    p = sub.add_parser("run", help="seeded macro-replications of the search")
    common(p)
    p.add_argument("--macro-reps", type=int, dest="macro_reps")
    p.add_argument("--jobs", type=int, help="worker processes for replications")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evaluate", help="classify an existing sample set without new evaluations")
    p.add_argument("samples", help="CSV of x_1..x_d,value rows")
    common(p)
    p.set_defaults(func=cmd_evaluate, macro_reps=None, jobs=None)

    p = sub.add_parser("oracle", help="uniform Monte-Carlo estimate of the negative volume")
    p.add_argument("--problem")
    p.add_argument("--samples", type=int, default=150_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigInvalid, MalformedRow, PointOutsideDomain) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
