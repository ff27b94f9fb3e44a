"""File formats: flat key-value configs, dataset/counts files, manifests
and the experiment CSV schemas.

Configs are diff-friendly ``key = value`` lines ('#' starts a comment).
List-valued keys are comma-separated.  Grid keys (risk_setting, vaf,
population, prevalence) may hold several values; an experiment expands
their cartesian product into scenarios, enumerated in the order
risk_setting, population, vaf, prevalence.  All outputs are written
deterministically: rerunning with the same seed reproduces every file
byte for byte.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

from epifam import __version__, model
from epifam.counts import CountsTable
from epifam.experiments import (
    METHODS,
    MetricsRow,
    ReplicateRecord,
    ScenarioConfig,
    SensitivityRecord,
    SensitivityRow,
    population_label,
    vaf_label,
)
from epifam.simulate import RNG_ALGORITHM, FamilyRecord, PopulationComponent, PopulationModel


class ConfigError(ValueError):
    """A config file cannot be parsed or describes an invalid setup."""


# ---------------------------------------------------------------------------
# key-value configs


def parse_key_values(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"{source}:{lineno}: empty key or value")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(path) -> dict[str, str]:
    path = Path(path)
    return parse_key_values(path.read_text(), source=str(path))


def _parse_list(value: str, parse, key: str):
    try:
        return [parse(part.strip()) for part in value.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"field {key!r}: {exc}") from exc


_SCENARIO_KEYS = {
    "risk_setting", "r1", "r2", "r_im", "s1", "s2",
    "vaf", "population", "zeta_male", "zeta_female",
    "mixture_vafs", "mixture_weights", "mixture_prevalences",
    "mixture_zeta_male", "mixture_zeta_female",
    "prevalence", "analysis_prevalence",
    "n_case_families", "n_control_families", "missing_father_prob",
    "methods", "replicates", "seed", "multipliers",
}


def _float_field(cfg, key, default=None):
    if key not in cfg:
        return default
    try:
        return float(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"field {key!r}: {exc}") from exc


def _int_field(cfg, key, default=None):
    if key not in cfg:
        return default
    try:
        return int(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"field {key!r}: {exc}") from exc


def _mixture_population(cfg: dict[str, str]) -> PopulationModel:
    if "mixture_vafs" not in cfg:
        raise ConfigError("population 'mixture' needs the mixture_vafs key")
    vafs = _parse_list(cfg["mixture_vafs"], float, "mixture_vafs")
    k = len(vafs)
    weights = (
        _parse_list(cfg["mixture_weights"], float, "mixture_weights")
        if "mixture_weights" in cfg
        else [1.0 / k] * k
    )
    prevs = (
        _parse_list(cfg["mixture_prevalences"], float, "mixture_prevalences")
        if "mixture_prevalences" in cfg
        else [None] * k
    )
    zm = (
        _parse_list(cfg["mixture_zeta_male"], float, "mixture_zeta_male")
        if "mixture_zeta_male" in cfg
        else [0.0] * k
    )
    zf = (
        _parse_list(cfg["mixture_zeta_female"], float, "mixture_zeta_female")
        if "mixture_zeta_female" in cfg
        else [0.0] * k
    )
    for name, values in (("mixture_weights", weights), ("mixture_prevalences", prevs),
                         ("mixture_zeta_male", zm), ("mixture_zeta_female", zf)):
        if len(values) != k:
            raise ConfigError(f"field {name!r}: expected {k} entries to match mixture_vafs")
    try:
        return PopulationModel(
            tuple(
                PopulationComponent(
                    vaf=v, zeta_male=m, zeta_female=f, weight=w, prevalence=p
                )
                for v, w, p, m, f in zip(vafs, weights, prevs, zm, zf)
            )
        )
    except ValueError as exc:
        raise ConfigError(f"mixture population: {exc}") from exc


def build_scenarios(cfg: dict[str, str], overrides: Optional[dict] = None) -> list[ScenarioConfig]:
    """Expand a config mapping into the scenario grid it describes.

    ``overrides`` may replace 'replicates' and 'seed' (CLI flags).
    """
    unknown = set(cfg) - _SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    overrides = overrides or {}

    custom_risks = {k: float(cfg[k]) for k in ("r1", "r2", "r_im", "s1", "s2") if k in cfg}
    if "risk_setting" in cfg:
        if custom_risks:
            raise ConfigError("give either risk_setting or explicit r1..s2 values, not both")
        settings = _parse_list(cfg["risk_setting"], int, "risk_setting")
    elif custom_risks:
        settings = [None]
    else:
        raise ConfigError("a risk_setting (1..8) or explicit r1..s2 values are required")

    prevalences = _parse_list(cfg.get("prevalence", ""), float, "prevalence")
    if not prevalences:
        raise ConfigError("the prevalence key is required")
    pop_labels = _parse_list(cfg.get("population", "hwe"), str, "population")
    vafs = _parse_list(cfg.get("vaf", ""), float, "vaf") if "vaf" in cfg else []
    zeta_male = _float_field(cfg, "zeta_male", 0.1)
    zeta_female = _float_field(cfg, "zeta_female", 0.3)

    populations: list[PopulationModel] = []
    for label in pop_labels:
        if label == "hwe":
            if not vafs:
                raise ConfigError("population 'hwe' needs the vaf key")
            populations.extend(PopulationModel.hwe(v) for v in vafs)
        elif label == "inbred":
            if not vafs:
                raise ConfigError("population 'inbred' needs the vaf key")
            populations.extend(PopulationModel.inbred(v, zeta_male, zeta_female) for v in vafs)
        elif label == "mixture":
            populations.append(_mixture_population(cfg))
        else:
            raise ConfigError(f"unknown population {label!r} (choose hwe, inbred or mixture)")

    methods = tuple(_parse_list(cfg.get("methods", "lime-mix"), str, "methods"))
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    replicates = overrides.get("replicates")
    if replicates is None:
        replicates = _int_field(cfg, "replicates", 300)
    seed = overrides.get("seed")
    if seed is None:
        seed = _int_field(cfg, "seed", 0)

    common = dict(
        analysis_prevalence=_float_field(cfg, "analysis_prevalence"),
        case_families=_int_field(cfg, "n_case_families", 150),
        control_families=_int_field(cfg, "n_control_families", 150),
        missing_father_prob=_float_field(cfg, "missing_father_prob", 0.5),
        methods=methods,
        replicates=replicates,
    )
    scenarios = []
    index = 0
    try:
        for setting in settings:
            for population in populations:
                for prevalence in prevalences:
                    scenarios.append(
                        ScenarioConfig(
                            population=population,
                            prevalence=prevalence,
                            risk_setting=setting,
                            risks=custom_risks if setting is None else None,
                            base_seed=(seed, index),
                            scenario_index=index,
                            **common,
                        )
                    )
                    index += 1
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return scenarios


def config_multipliers(cfg: dict[str, str]) -> list[float]:
    if "multipliers" not in cfg:
        raise ConfigError("a sensitivity run needs the multipliers key")
    return _parse_list(cfg["multipliers"], float, "multipliers")


# ---------------------------------------------------------------------------
# dataset and counts files

DATASET_HEADER = ["family_id", "m", "f", "c", "d"]


def write_dataset(path, records: Sequence[FamilyRecord]) -> None:
    """One family per line: family_id, m, f (empty when missing), c, d."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(DATASET_HEADER)
        for i, r in enumerate(records):
            writer.writerow([i, r.mother, "" if r.father is None else r.father, r.child, int(r.affected)])


def read_dataset(path) -> tuple[FamilyRecord, ...]:
    records = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != DATASET_HEADER:
            raise ConfigError(f"{path}: expected dataset header {','.join(DATASET_HEADER)}")
        for row in reader:
            if len(row) != 5:
                raise ConfigError(f"{path}: malformed dataset row {row!r}")
            _, m, f, c, d = row
            records.append(
                FamilyRecord(
                    mother=int(m),
                    father=None if f == "" else int(f),
                    child=int(c),
                    affected=bool(int(d)),
                )
            )
    return tuple(records)


def _counts_keys() -> list[str]:
    keys = []
    for arm in ("case", "control"):
        keys += [f"triad_{arm}_{i + 1}" for i in range(len(model.TRIAD_TYPES))]
    for arm in ("case", "control"):
        keys += [f"pair_{arm}_{p.m}_{p.c}" for p in model.PAIR_TYPES]
    keys += [f"total_{kind}_{arm}" for kind in ("triad", "pair") for arm in ("case", "control")]
    return keys


def write_counts(path, counts: CountsTable) -> None:
    """Key-value rows keyed by canonical type labels, plus the four totals."""
    lines = []
    for arm, cells in (("case", counts.case_triads), ("control", counts.control_triads)):
        lines += [f"triad_{arm}_{i + 1} = {n}" for i, n in enumerate(cells)]
    for arm, cells in (("case", counts.case_pairs), ("control", counts.control_pairs)):
        lines += [f"pair_{arm}_{p.m}_{p.c} = {n}" for p, n in zip(model.PAIR_TYPES, cells)]
    lines.append(f"total_triad_case = {counts.total_case_triads}")
    lines.append(f"total_triad_control = {counts.total_control_triads}")
    lines.append(f"total_pair_case = {counts.total_case_pairs}")
    lines.append(f"total_pair_control = {counts.total_control_pairs}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_counts(path) -> CountsTable:
    cfg = load_config(path)
    expected = set(_counts_keys())
    missing = expected - set(cfg)
    if missing:
        raise ConfigError(f"{path}: missing counts keys: {', '.join(sorted(missing))}")
    unknown = set(cfg) - expected
    if unknown:
        raise ConfigError(f"{path}: unknown counts keys: {', '.join(sorted(unknown))}")

    def cells(prefix, labels):
        try:
            return tuple(int(cfg[f"{prefix}_{label}"]) for label in labels)
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    triad_labels = [str(i + 1) for i in range(len(model.TRIAD_TYPES))]
    pair_labels = [f"{p.m}_{p.c}" for p in model.PAIR_TYPES]
    try:
        return CountsTable(
            case_triads=cells("triad_case", triad_labels),
            control_triads=cells("triad_control", triad_labels),
            case_pairs=cells("pair_case", pair_labels),
            control_pairs=cells("pair_control", pair_labels),
            total_case_triads=int(cfg["total_triad_case"]),
            total_control_triads=int(cfg["total_triad_control"]),
            total_case_pairs=int(cfg["total_pair_case"]),
            total_control_pairs=int(cfg["total_pair_control"]),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# manifests


def write_manifest(path, payload: dict) -> None:
    """Deterministic JSON manifest; the rng algorithm and version are added."""
    payload = dict(payload)
    payload.setdefault("tool_version", __version__)
    payload.setdefault("rng_algorithm", RNG_ALGORITHM)
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------------
# CSV schemas


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".12g")
    return str(value)


_SCENARIO_FIELDS = [
    "scenario_index", "risk_setting", "vaf", "population",
    "prevalence", "analysis_prevalence",
    "case_families", "control_families", "missing_father_prob",
]

METRICS_HEADER = (
    _SCENARIO_FIELDS
    + ["method", "replicates", "converged", "failures"]
    + [f"bias_mean_{p}" for p in model.PARAM_NAMES]
    + [f"bias_median_{p}" for p in model.PARAM_NAMES]
    + [f"reject_{h}" for h in ("association", "imprinting", "maternal")]
)

RECORDS_HEADER = (
    _SCENARIO_FIELDS
    + ["method", "replicate", "converged", "failure", "loglik"]
    + [f"est_{p}" for p in model.PARAM_NAMES]
    + [f"bias_{p}" for p in model.PARAM_NAMES]
    + [f"p_{h}" for h in ("association", "imprinting", "maternal")]
)

SENSITIVITY_SUMMARY_HEADER = _SCENARIO_FIELDS + [
    "multiplier", "parameter", "pairs", "mean_abs_rel_diff", "median_abs_rel_diff",
]

SENSITIVITY_RECORDS_HEADER = (
    _SCENARIO_FIELDS
    + ["replicate", "multiplier", "multiplier_prevalence", "converged"]
    + [f"est_{p}" for p in model.PARAM_NAMES]
    + [f"bias_{p}" for p in model.PARAM_NAMES]
    + [f"rel_diff_{p}" for p in model.PARAM_NAMES]
)


def _scenario_values(row_or_config) -> list:
    if isinstance(row_or_config, MetricsRow):
        r = row_or_config
        return [r.scenario_index, r.risk_setting, r.vaf, r.population, r.prevalence,
                r.analysis_prevalence, r.case_families, r.control_families, r.missing_father_prob]
    c = row_or_config
    return [c.scenario_index, c.setting_label, vaf_label(c.population), population_label(c.population),
            c.prevalence, c.effective_analysis_prevalence,
            c.case_families, c.control_families, c.missing_father_prob]


def metrics_csv_rows(rows: Iterable[MetricsRow]) -> list[list[str]]:
    out = []
    for r in rows:
        values = _scenario_values(r) + [r.method, r.replicates, r.converged, r.failures]
        values += [r.bias_mean[p] for p in model.PARAM_NAMES]
        values += [r.bias_median[p] for p in model.PARAM_NAMES]
        values += [r.rejection_rates[h] for h in ("association", "imprinting", "maternal")]
        out.append([_fmt(v) for v in values])
    return out


def records_csv_rows(config: ScenarioConfig, records: Iterable[ReplicateRecord]) -> list[list[str]]:
    scenario = _scenario_values(config)
    out = []
    for r in records:
        values = scenario + [r.method, r.replicate, int(r.converged), r.failure or "", r.loglik]
        values += [r.estimates.get(p) for p in model.PARAM_NAMES]
        values += [r.biases.get(p) for p in model.PARAM_NAMES]
        values += [r.p_values.get(h) for h in ("association", "imprinting", "maternal")]
        out.append([_fmt(v) for v in values])
    return out


def sensitivity_summary_rows(config: ScenarioConfig, rows: Iterable[SensitivityRow]) -> list[list[str]]:
    scenario = _scenario_values(config)
    return [
        [_fmt(v) for v in scenario + [r.multiplier, r.parameter, r.pairs,
                                      r.mean_abs_rel_diff, r.median_abs_rel_diff]]
        for r in rows
    ]


def sensitivity_records_rows(
    config: ScenarioConfig, records: Iterable[SensitivityRecord]
) -> list[list[str]]:
    scenario = _scenario_values(config)
    out = []
    for r in records:
        values = scenario + [r.replicate, r.multiplier, r.analysis_prevalence, int(r.converged)]
        values += [r.estimates.get(p) for p in model.PARAM_NAMES]
        values += [r.biases.get(p) for p in model.PARAM_NAMES]
        values += [r.rel_diffs.get(p) for p in model.PARAM_NAMES]
        out.append([_fmt(v) for v in values])
    return out


class CsvAppender:
    """Header-once CSV writer flushed after every append batch."""

    def __init__(self, path, header: Sequence[str]):
        self._handle = open(path, "w", newline="")
        self._writer = csv.writer(self._handle)
        self._writer.writerow(header)
        self._handle.flush()

    def append(self, rows: Iterable[Sequence[str]]) -> None:
        for row in rows:
            self._writer.writerow(row)
        self._handle.flush()

    def close(self) -> None:
        self._handle.close()
