"""Command-line entry point: simulate / fit / test / experiment / sensitivity.

Exit codes: 0 success, 1 I/O error, 2 configuration error, 3 degenerate
data.  Every output directory gets exactly one manifest.json describing
the run; experiment outputs are flushed scenario by scenario so an
interrupted run keeps its completed scenarios (the manifest's "complete"
flag marks the difference).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from epifam import __version__, baselines, io, likelihood, model, simulate
from epifam.experiments import (
    METHODS,
    run_scenario,
    sensitivity_run,
)
from epifam.io import ConfigError
from epifam.likelihood import DegenerateDataError
from epifam.simulate import AscertainmentSpec, ConfigurationError, SimulationModel

HYPOTHESIS_CHOICES = ("association", "imprinting", "maternal", "all")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epifam",
        description="Partial-likelihood analysis of imprinting and maternal effects "
        "from case-control family genotype data.",
    )
    parser.add_argument("--version", action="version", version=f"epifam {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate one family sample and its counts table")
    sim.add_argument("--config", required=True, help="scenario config file (key = value lines)")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    sim.set_defaults(func=cmd_simulate)

    for name, with_tests in (("fit", False), ("test", True)):
        p = sub.add_parser(
            name,
            help=(
                "estimate the disease-model parameters from a counts file"
                if not with_tests
                else "estimate and run likelihood-ratio tests"
            ),
        )
        p.add_argument("--counts", required=True, help="counts file (see simulate output)")
        p.add_argument("--prevalence", type=float, required=True, help="known disease prevalence")
        p.add_argument("--method", choices=METHODS, default="lime-mix")
        p.add_argument("--out", default=None, help="directory for report.json and manifest.json")
        if with_tests:
            p.add_argument("--hypothesis", choices=HYPOTHESIS_CHOICES, default="all")
            p.add_argument("--sided", choices=("two", "greater", "less"), default="two",
                           help="sidedness of the imprinting test")
        p.set_defaults(func=cmd_fit_test, with_tests=with_tests)

    exp = sub.add_parser("experiment", help="run a scenario grid and write metrics CSVs")
    exp.add_argument("--config", required=True)
    exp.add_argument("--out", required=True)
    exp.add_argument("--replicates", type=int, default=None, help="override the config replicates")
    exp.add_argument("--seed", type=int, default=None, help="override the config seed")
    exp.add_argument("--workers", type=int, default=1, help="parallel replicate workers")
    exp.set_defaults(func=cmd_experiment)

    sens = sub.add_parser("sensitivity", help="re-analyze simulated data under misspecified prevalences")
    sens.add_argument("--config", required=True)
    sens.add_argument("--out", required=True)
    sens.add_argument("--replicates", type=int, default=None)
    sens.add_argument("--seed", type=int, default=None)
    sens.add_argument("--workers", type=int, default=1)
    sens.set_defaults(func=cmd_sensitivity)
    return parser


def _overrides(args) -> dict:
    out = {}
    if getattr(args, "replicates", None) is not None:
        out["replicates"] = args.replicates
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    return out


def _single_scenario(args):
    cfg = io.load_config(args.config)
    cfg.pop("methods", None)  # irrelevant for simulate
    scenarios = io.build_scenarios(cfg, overrides=_overrides(args))
    if len(scenarios) != 1:
        raise ConfigError(
            f"{args.config} describes {len(scenarios)} scenarios; "
            "simulate needs single-valued risk_setting/vaf/population/prevalence"
        )
    return cfg, scenarios[0]


def cmd_simulate(args) -> int:
    cfg, scenario = _single_scenario(args)
    sim = SimulationModel.from_prevalence(
        scenario.population, scenario.prevalence, **scenario.resolved_risks()
    )
    seed = args.seed if args.seed is not None else io._int_field(cfg, "seed", 0)
    spec = AscertainmentSpec(
        case_families=scenario.case_families,
        control_families=scenario.control_families,
        missing_father_prob=scenario.missing_father_prob,
        rng_seed=seed,
    )
    records = simulate.ascertain(sim, spec)
    counts = simulate.tabulate(records)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_dataset(out / "dataset.csv", records)
    io.write_counts(out / "counts.txt", counts)
    io.write_manifest(
        out / "manifest.json",
        {
            "subcommand": "simulate",
            "seed": seed,
            "config": cfg,
            "inputs": [str(args.config)],
            "outputs": ["dataset.csv", "counts.txt"],
            "complete": True,
        },
    )
    print(f"wrote {counts.total_families} families to {out}/dataset.csv and counts.txt")
    return 0


def _analyze_counts(args, counts, hypotheses):
    prevalence = args.prevalence
    method = args.method
    if method == "lime-mix":
        return likelihood.fit_and_test(counts, prevalence, hypotheses)
    if method == "lime-pair":
        if not counts.is_pairs_only:
            raise ConfigError("lime-pair analyzes pairs-only counts; use lime-mix for mixed data")
        return likelihood.fit_and_test(counts, prevalence, hypotheses, fixed={"r_im": 1.0})
    if method == "ll-lrt":
        return baselines.ll_lrt_fit_and_test(counts.case_triads, hypotheses)
    if method == "cll":
        if not counts.is_pairs_only:
            raise ConfigError("cll analyzes pairs-only counts")
        return baselines.cll_fit_and_test(counts, prevalence, hypotheses)
    raise ConfigError(f"unknown method {method!r}")


def _report_text(args, counts, fit_result, tests) -> str:
    lines = [
        f"method: {args.method}   prevalence: {args.prevalence:g}   "
        f"families: {counts.total_families}",
        "",
        f"{'parameter':<10}{'estimate':>12}",
    ]
    for name in fit_result.free:
        lines.append(f"{name:<10}{fit_result.estimates[name]:>12.6g}")
    lines.append("")
    lines.append(f"log-likelihood: {fit_result.loglik:.6g}")
    lines.append(f"converged: {fit_result.converged}   iterations: {fit_result.iterations}")
    if fit_result.at_boundary:
        lines.append("at boundary: " + ", ".join(sorted(fit_result.at_boundary)))
    pos_11 = model.EXCLUDED_PAIR.index - 1
    excluded_11 = counts.case_pairs[pos_11] + counts.control_pairs[pos_11]
    if excluded_11:
        lines.append(
            f"note: {excluded_11} doubly heterozygous mother-child pair families "
            "are excluded from the partial likelihood"
        )
    if tests:
        lines.append("")
        lines.append(f"{'hypothesis':<14}{'statistic':>12}{'df':>4}{'p-value':>12}")
        for label, t in tests.items():
            lines.append(f"{label:<14}{t.statistic:>12.6g}{t.df:>4}{t.p_value:>12.6g}")
    return "\n".join(lines)


def cmd_fit_test(args) -> int:
    counts = io.read_counts(args.counts)
    hypotheses = []
    if args.with_tests:
        wanted = (
            list(likelihood.HYPOTHESIS_LABELS) if args.hypothesis == "all" else [args.hypothesis]
        )
        if args.method in ("lime-pair", "cll"):
            wanted = [h for h in wanted if h != "imprinting"]
            if not wanted:
                raise ConfigError(f"{args.method} cannot test imprinting (no imprinting term)")
        hypotheses = [likelihood.hypothesis_from_label(h, args.sided) for h in wanted]
    full, tests = _analyze_counts(args, counts, hypotheses)
    print(_report_text(args, counts, full, tests))
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report = {
            "method": args.method,
            "prevalence": args.prevalence,
            "estimates": full.estimates,
            "free": list(full.free),
            "loglik": full.loglik,
            "converged": full.converged,
            "iterations": full.iterations,
            "at_boundary": sorted(full.at_boundary),
            "excluded_cells": list(full.excluded_cells),
            "tests": {
                label: {
                    "statistic": t.statistic,
                    "df": t.df,
                    "p_value": t.p_value,
                    "sided": t.hypothesis.sided,
                }
                for label, t in tests.items()
            },
        }
        (out / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
        io.write_manifest(
            out / "manifest.json",
            {
                "subcommand": "test" if args.with_tests else "fit",
                "seed": None,
                "config": {
                    "counts": str(args.counts),
                    "prevalence": str(args.prevalence),
                    "method": args.method,
                },
                "inputs": [str(args.counts)],
                "outputs": ["report.json"],
                "complete": True,
            },
        )
    return 0


def cmd_experiment(args) -> int:
    cfg = io.load_config(args.config)
    cfg.pop("multipliers", None)
    scenarios = io.build_scenarios(cfg, overrides=_overrides(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "subcommand": "experiment",
        "seed": _overrides(args).get("seed", io._int_field(cfg, "seed", 0)),
        "config": cfg,
        "overrides": {k: v for k, v in _overrides(args).items()},
        "scenarios": len(scenarios),
        "inputs": [str(args.config)],
        "outputs": ["metrics.csv", "records.csv"],
        "complete": False,
    }
    io.write_manifest(out / "manifest.json", manifest)
    metrics = io.CsvAppender(out / "metrics.csv", io.METRICS_HEADER)
    records = io.CsvAppender(out / "records.csv", io.RECORDS_HEADER)
    try:
        for i, scenario in enumerate(scenarios):
            result = run_scenario(scenario, workers=args.workers)
            metrics.append(io.metrics_csv_rows(result.metrics))
            records.append(io.records_csv_rows(scenario, result.records))
            failures = sum(r.failures for r in result.metrics)
            print(
                f"scenario {i + 1}/{len(scenarios)} "
                f"(setting {scenario.setting_label}, vaf {io.vaf_label(scenario.population)}, "
                f"{io.population_label(scenario.population)}, prev {scenario.prevalence:g}): "
                f"{scenario.replicates} replicates, {failures} failures",
                file=sys.stderr,
            )
    finally:
        metrics.close()
        records.close()
    manifest["complete"] = True
    io.write_manifest(out / "manifest.json", manifest)
    return 0


def cmd_sensitivity(args) -> int:
    cfg = io.load_config(args.config)
    multipliers = io.config_multipliers(cfg)
    scenario_cfg = {k: v for k, v in cfg.items() if k != "multipliers"}
    scenarios = io.build_scenarios(scenario_cfg, overrides=_overrides(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "subcommand": "sensitivity",
        "seed": _overrides(args).get("seed", io._int_field(cfg, "seed", 0)),
        "config": cfg,
        "scenarios": len(scenarios),
        "inputs": [str(args.config)],
        "outputs": ["sensitivity_summary.csv", "sensitivity_records.csv"],
        "complete": False,
    }
    io.write_manifest(out / "manifest.json", manifest)
    summary = io.CsvAppender(out / "sensitivity_summary.csv", io.SENSITIVITY_SUMMARY_HEADER)
    records = io.CsvAppender(out / "sensitivity_records.csv", io.SENSITIVITY_RECORDS_HEADER)
    try:
        for i, scenario in enumerate(scenarios):
            result = sensitivity_run(scenario, multipliers, workers=args.workers)
            summary.append(io.sensitivity_summary_rows(scenario, result.rows))
            records.append(io.sensitivity_records_rows(scenario, result.records))
            print(
                f"scenario {i + 1}/{len(scenarios)} "
                f"(setting {scenario.setting_label}): {scenario.replicates} replicates x "
                f"{len(result.multipliers)} prevalences",
                file=sys.stderr,
            )
    finally:
        summary.close()
        records.close()
    manifest["complete"] = True
    io.write_manifest(out / "manifest.json", manifest)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ConfigurationError, model.FeasibilityError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DegenerateDataError as exc:
        print(f"degenerate data: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
