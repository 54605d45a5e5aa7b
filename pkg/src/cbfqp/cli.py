"""Command-line scenario runner.

    cbfqp run [--config FILE] [--scenario ID] [--method NAME] --out DIR
    cbfqp list-scenarios [--config FILE]
    cbfqp validate --config FILE

Exit codes: 0 when every run executed, 1 on an execution error, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

from .qp import QpStatus
from .scenarios import (
    EXPECT_OPS,
    ConfigError,
    ScenarioSpec,
    builtin_specs,
    parse_config,
)
from .sim import TrajectoryLog, compute_metrics, simulate

log = logging.getLogger("cbfqp")

SUMMARY_VERSION = "1"


@dataclass
class SummaryReport:
    runs: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"version": SUMMARY_VERSION, "runs": self.runs}

    @property
    def errors(self) -> list:
        return [r for r in self.runs if r.get("error")]


def csv_name(scenario: str, label: str, sweep_tag: Optional[str] = None) -> str:
    parts = [scenario, label] + ([sweep_tag] if sweep_tag else [])
    return "__".join(parts) + ".csv"


def write_trajectory_csv(traj: TrajectoryLog, path) -> None:
    """Header plus one row per step; floats in shortest round-trip form."""
    n = traj.states.shape[1]
    m = traj.inputs.shape[1]
    k = traj.h.shape[1]
    header = (["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)]
              + ["V"] + [f"h{i + 1}" for i in range(k)] + ["delta1"]
              + [f"delta2_{i + 1}" for i in range(k)] + ["status"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(traj)):
            row = [traj.t[i], *traj.states[i], *traj.inputs[i], traj.V[i], *traj.h[i],
                   traj.delta1[i], *traj.delta2[i]]
            status = "OPT" if traj.status[i] is QpStatus.OPTIMAL else "INF"
            w.writerow([repr(float(v)) for v in row] + [status])


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, list):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def write_summary(report: SummaryReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(report.to_dict()), fh, sort_keys=True, indent=2)
        fh.write("\n")


def check_expectations(checks: dict, metrics: dict) -> list:
    out = []
    for metric, rule in sorted(checks.items()):
        actual = metrics.get(metric)
        rules = rule if isinstance(rule, dict) else {"eq": rule}
        ok = all(EXPECT_OPS[op](actual, ref) for op, ref in rules.items())
        out.append({"metric": metric, "expected": rules, "actual": actual, "passed": bool(ok)})
    return out


def run_scenario(spec: ScenarioSpec, out_dir, methods=None) -> SummaryReport:
    """Simulate every (method, sweep point) of ``spec``, writing one CSV per run
    and ``<scenario>__summary.json``. Run failures are recorded, not raised."""
    os.makedirs(out_dir, exist_ok=True)
    plant = spec.make_plant()
    report = SummaryReport()
    for mspec, extra in spec.runs():
        if methods and mspec.label not in methods and mspec.method.value not in methods:
            continue
        tag = spec.sweep.tag(extra[spec.sweep.key]) if extra else None
        name = csv_name(spec.id, mspec.label, tag)
        entry = {"scenario": spec.id, "method": mspec.method.value, "label": mspec.label,
                 "sweep": extra, "csv": name, "metrics": None, "expectations": [],
                 "passed": None, "error": None}
        try:
            cfg = spec.framework_config(mspec, plant, extra)
            traj = simulate(plant.system, (plant.clf, plant.cbfs), cfg, spec.sim, plant.x0,
                            goal=plant.at_goal, collision=plant.collision, scenario=spec.id)
        except (ArithmeticError, RuntimeError, ValueError) as exc:
            entry["error"] = f"{type(exc).__name__}: {exc}"
            report.runs.append(entry)
            log.error("%s/%s failed: %s", spec.id, mspec.label, exc)
            continue
        write_trajectory_csv(traj, os.path.join(out_dir, name))
        metrics = compute_metrics(traj, plant).to_dict()
        entry["metrics"] = metrics
        entry["config_hash"] = traj.metadata["config_hash"]
        if traj.aborted:
            entry["error"] = traj.aborted
        if extra is None and mspec.label in spec.expect:
            entry["expectations"] = check_expectations(spec.expect[mspec.label], metrics)
            entry["passed"] = all(e["passed"] for e in entry["expectations"])
        report.runs.append(entry)
        log.info("%s %s", spec.id, name)
    write_summary(report, os.path.join(out_dir, f"{spec.id}__summary.json"))
    return report


def _load(config) -> list:
    return parse_config(config) if config else builtin_specs()


def _cmd_run(args) -> int:
    specs = _load(args.config)
    if args.scenario:
        specs = [s for s in specs if s.id == args.scenario]
        if not specs:
            raise ConfigError(f"unknown scenario {args.scenario!r}")
    methods = [args.method] if args.method else None
    if methods and not any(m.label in methods or m.method.value in methods
                           for s in specs for m in s.methods):
        raise ConfigError(f"no scenario runs method {args.method!r}")
    status = 0
    for spec in specs:
        try:
            report = run_scenario(spec, args.out, methods)
        except OSError as exc:
            print(f"error: {exc.filename or args.out}: {exc.strerror}", file=sys.stderr)
            return 1
        for r in report.runs:
            verdict = {True: "pass", False: "FAIL", None: "-"}[r["passed"]]
            if r["error"]:
                verdict = "ERROR"
                status = 1
            print(f"{r['scenario']:<14} {r['csv']:<44} {verdict}")
    return status


def _cmd_list(args) -> int:
    for spec in _load(args.config):
        labels = ", ".join(m.label for m in spec.methods)
        print(f"{spec.id:<14} {spec.plant.value:<17} {labels}")
    return 0


def _cmd_validate(args) -> int:
    specs = parse_config(args.config)
    print(f"ok: {len(specs)} scenario(s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cbfqp", description="CLF-CBF QP scenario runner")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate scenarios and write CSV/JSON output")
    run.add_argument("--config", help="JSON scenario file (default: built-in scenarios)")
    run.add_argument("--scenario", help="run only this scenario id")
    run.add_argument("--method", help="run only this method name or label")
    run.add_argument("--out", required=True, help="output directory")
    run.set_defaults(func=_cmd_run)

    ls = sub.add_parser("list-scenarios", help="print scenario ids")
    ls.add_argument("--config")
    ls.set_defaults(func=_cmd_list)

    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("--config", required=True)
    val.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
