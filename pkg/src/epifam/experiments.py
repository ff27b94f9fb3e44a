"""Simulation-study orchestration: scenario grids, replicate execution and
bias / type-I error / power metrics.

A scenario fixes the disease-risk setting, the population, the
prevalence, the ascertainment design and the methods to compare.  Every
replicate simulates one complete family sample and hands each method its
own view of the same families (mixture with masked fathers, pairs-only,
or complete case triads), so method contrasts are paired.  Replicates
own independent child streams of the scenario seed; results are
identical for any worker count.
"""

from __future__ import annotations

from dataclasses import dataclass
from multiprocessing import get_context
from statistics import mean, median
from typing import Mapping, Optional, Sequence

import numpy as np

from epifam import baselines, likelihood, model, simulate
from epifam._optim import DEFAULT_OPTIONS, FitOptions
from epifam.counts import CountsTable
from epifam.simulate import AscertainmentSpec, ConfigurationError, PopulationModel, SimulationModel

METHODS = ("lime-mix", "lime-pair", "ll-lrt", "cll")

# the eight canonical relative-risk settings (r1, r2, r_im, s1, s2)
TABLE2_SETTINGS: dict[int, dict[str, float]] = {
    1: dict(r1=1.0, r2=1.0, r_im=1.0, s1=1.0, s2=1.0),
    2: dict(r1=2.0, r2=3.0, r_im=1.0, s1=1.0, s2=1.0),
    3: dict(r1=1.0, r2=3.0, r_im=1.0, s1=1.0, s2=1.0),
    4: dict(r1=1.0, r2=3.0, r_im=1.0, s1=2.0, s2=2.0),
    5: dict(r1=1.0, r2=3.0, r_im=3.0, s1=1.0, s2=1.0),
    6: dict(r1=3.0, r2=3.0, r_im=1.0 / 3.0, s1=1.0, s2=1.0),
    7: dict(r1=1.0, r2=3.0, r_im=3.0, s1=2.0, s2=2.0),
    8: dict(r1=3.0, r2=3.0, r_im=1.0 / 3.0, s1=2.0, s2=2.0),
}

# hypotheses each method can test and parameters it estimates
METHOD_HYPOTHESES = {
    "lime-mix": ("association", "imprinting", "maternal"),
    "lime-pair": ("association", "maternal"),
    "ll-lrt": ("association", "imprinting", "maternal"),
    "cll": ("association", "maternal"),
}
METHOD_BIAS_PARAMS = {
    "lime-mix": ("delta", "r1", "r2", "r_im", "s1", "s2"),
    "lime-pair": ("delta", "r1", "r2", "s1", "s2"),
    "ll-lrt": ("r1", "r2", "r_im", "s1", "s2"),
    "cll": ("delta", "r1", "r2", "s1", "s2"),
}

SIGNIFICANCE_LEVEL = 0.05


def relative_bias(estimate: float, truth: float) -> float:
    """(estimate - truth) / truth."""
    if truth == 0:
        raise ValueError("relative bias is undefined for a zero truth")
    return (estimate - truth) / truth


def population_label(population: PopulationModel) -> str:
    comps = population.components
    if len(comps) == 1:
        c = comps[0]
        if c.zeta_male == 0.0 and c.zeta_female == 0.0:
            return "hwe"
        return f"inbred(zm={c.zeta_male:g},zf={c.zeta_female:g})"
    parts = []
    for c in comps:
        bit = f"{c.weight:g}*vaf{c.vaf:g}"
        if c.zeta_male or c.zeta_female:
            bit += f"(zm={c.zeta_male:g},zf={c.zeta_female:g})"
        if c.prevalence is not None:
            bit += f"@prev{c.prevalence:g}"
        parts.append(bit)
    return "mix[" + "+".join(parts) + "]"


def vaf_label(population: PopulationModel) -> str:
    return "+".join(f"{c.vaf:g}" for c in population.components)


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation scenario; see TABLE2_SETTINGS for the named settings."""

    population: PopulationModel
    prevalence: float
    risk_setting: Optional[int] = None
    risks: Optional[Mapping[str, float]] = None
    analysis_prevalence: Optional[float] = None
    case_families: int = 150
    control_families: int = 150
    missing_father_prob: float = 0.5
    methods: tuple[str, ...] = ("lime-mix",)
    replicates: int = 300
    base_seed: object = 0  # anything numpy.random.SeedSequence accepts as entropy
    scenario_index: int = 0
    options: FitOptions = DEFAULT_OPTIONS

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        for m in self.methods:
            if m not in METHODS:
                raise ConfigurationError(f"unknown method {m!r}; choose from {METHODS}")
        if self.replicates < 0:
            raise ConfigurationError("replicates must be non-negative")
        if (self.risk_setting is None) == (self.risks is None):
            raise ConfigurationError("give exactly one of risk_setting or explicit risks")
        if self.risk_setting is not None and self.risk_setting not in TABLE2_SETTINGS:
            raise ConfigurationError(f"risk_setting must be 1..8, got {self.risk_setting!r}")

    @property
    def marginal_prevalence(self) -> float:
        """Population disease probability across components (components lacking
        their own prevalence use the scenario's)."""
        return sum(
            c.weight * (c.prevalence if c.prevalence is not None else self.prevalence)
            for c in self.population.components
        )

    @property
    def effective_analysis_prevalence(self) -> float:
        return (
            self.analysis_prevalence
            if self.analysis_prevalence is not None
            else self.marginal_prevalence
        )

    @property
    def setting_label(self) -> str:
        if self.risk_setting is not None:
            return str(self.risk_setting)
        return "custom"

    def resolved_risks(self) -> dict[str, float]:
        if self.risk_setting is not None:
            return dict(TABLE2_SETTINGS[self.risk_setting])
        risks = dict.fromkeys(model.RISK_NAMES, 1.0)
        for name, value in self.risks.items():
            if name not in model.RISK_NAMES:
                raise ConfigurationError(f"unknown risk parameter {name!r}")
            risks[name] = float(value)
        return risks


@dataclass(frozen=True)
class ReplicateRecord:
    """One method's analysis of one replicate."""

    replicate: int
    method: str
    converged: bool
    failure: Optional[str]
    loglik: Optional[float]
    estimates: dict[str, float]
    biases: dict[str, float]
    p_values: dict[str, float]


@dataclass(frozen=True)
class MetricsRow:
    """Aggregated results of one method within one scenario."""

    scenario_index: int
    risk_setting: str
    vaf: str
    population: str
    prevalence: float
    analysis_prevalence: float
    case_families: int
    control_families: int
    missing_father_prob: float
    method: str
    replicates: int
    converged: int
    failures: int
    bias_mean: dict[str, Optional[float]]
    bias_median: dict[str, Optional[float]]
    rejection_rates: dict[str, Optional[float]]


@dataclass(frozen=True)
class ScenarioResult:
    config: ScenarioConfig
    metrics: tuple[MetricsRow, ...]
    records: tuple[ReplicateRecord, ...]


def _resolve_model(config: ScenarioConfig) -> SimulationModel:
    try:
        return SimulationModel.from_prevalence(
            config.population, config.prevalence, **config.resolved_risks()
        )
    except (model.FeasibilityError, ValueError) as exc:
        raise ConfigurationError(f"infeasible scenario: {exc}") from exc


def _truth(config: ScenarioConfig, sim: SimulationModel) -> dict[str, Optional[float]]:
    truth: dict[str, Optional[float]] = dict(config.resolved_risks())
    if len(sim.component_params) == 1:
        truth["delta"] = sim.component_params[0].delta
    else:
        truth["delta"] = None  # no single true phenocopy rate in a mixture
    return truth


def _analyze_method(
    method: str,
    complete: tuple[simulate.FamilyRecord, ...],
    mixture_counts: Optional[CountsTable],
    analysis_prevalence: float,
    options: FitOptions,
):
    hyps = [likelihood.hypothesis_from_label(h) for h in METHOD_HYPOTHESES[method]]
    if method == "lime-mix":
        return likelihood.fit_and_test(mixture_counts, analysis_prevalence, hyps, options=options)
    if method == "lime-pair":
        pair_counts = simulate.tabulate(complete).drop_fathers()
        return likelihood.fit_and_test(
            pair_counts, analysis_prevalence, hyps, fixed={"r_im": 1.0}, options=options
        )
    if method == "ll-lrt":
        case_triads = simulate.tabulate(complete).case_triads
        return baselines.ll_lrt_fit_and_test(case_triads, hyps, options=options)
    if method == "cll":
        pair_counts = simulate.tabulate(complete).drop_fathers()
        return baselines.cll_fit_and_test(pair_counts, analysis_prevalence, hyps, options=options)
    raise ConfigurationError(f"unknown method {method!r}")


def _record_from_fit(method, rep_index, truth, full, tests) -> ReplicateRecord:
    converged = full.converged and all(t.fit_null.converged for t in tests.values())
    estimates = {k: v for k, v in full.estimates.items() if k in model.PARAM_NAMES}
    biases = {}
    for name in METHOD_BIAS_PARAMS[method]:
        t = truth.get(name)
        if t not in (None, 0) and name in estimates:
            biases[name] = relative_bias(estimates[name], t)
    return ReplicateRecord(
        replicate=rep_index,
        method=method,
        converged=converged,
        failure=None,
        loglik=full.loglik,
        estimates=estimates,
        biases=biases,
        p_values={label: t.p_value for label, t in tests.items()},
    )


def _run_replicate(args) -> list[ReplicateRecord]:
    sim, config, truth, rep_index, seed = args
    sim_stream, mask_stream = seed.spawn(2)
    rng = np.random.default_rng(sim_stream)
    complete = simulate.ascertain(
        sim,
        AscertainmentSpec(config.case_families, config.control_families, 0.0),
        rng=rng,
    )
    mixture_counts = None
    if "lime-mix" in config.methods:
        masked = simulate.mask_fathers(
            complete, config.missing_father_prob, np.random.default_rng(mask_stream)
        )
        mixture_counts = simulate.tabulate(masked)
    analysis_prevalence = config.effective_analysis_prevalence
    out = []
    for method in config.methods:
        try:
            full, tests = _analyze_method(
                method, complete, mixture_counts, analysis_prevalence, config.options
            )
            out.append(_record_from_fit(method, rep_index, truth, full, tests))
        except Exception as exc:  # a failed replicate is data, not a crash
            out.append(
                ReplicateRecord(
                    replicate=rep_index,
                    method=method,
                    converged=False,
                    failure=f"{type(exc).__name__}: {exc}",
                    loglik=None,
                    estimates={},
                    biases={},
                    p_values={},
                )
            )
    return out


def _aggregate(config: ScenarioConfig, method: str, records) -> MetricsRow:
    ok = [r for r in records if r.converged and r.failure is None]
    bias_mean: dict[str, Optional[float]] = {}
    bias_median: dict[str, Optional[float]] = {}
    for name in model.PARAM_NAMES:
        values = [r.biases[name] for r in ok if name in r.biases]
        bias_mean[name] = mean(values) if values else None
        bias_median[name] = median(values) if values else None
    rates: dict[str, Optional[float]] = {}
    for label in likelihood.HYPOTHESIS_LABELS:
        if label in METHOD_HYPOTHESES[method]:
            hits = [r.p_values[label] < SIGNIFICANCE_LEVEL for r in ok if label in r.p_values]
            rates[label] = (sum(hits) / len(hits)) if hits else None
        else:
            rates[label] = None
    return MetricsRow(
        scenario_index=config.scenario_index,
        risk_setting=config.setting_label,
        vaf=vaf_label(config.population),
        population=population_label(config.population),
        prevalence=config.prevalence,
        analysis_prevalence=config.effective_analysis_prevalence,
        case_families=config.case_families,
        control_families=config.control_families,
        missing_father_prob=config.missing_father_prob,
        method=method,
        replicates=config.replicates,
        converged=len(ok),
        failures=len(records) - len(ok),
        bias_mean=bias_mean,
        bias_median=bias_median,
        rejection_rates=rates,
    )


def run_scenario(config: ScenarioConfig, *, workers: int = 1) -> ScenarioResult:
    """Simulate and analyze every replicate of one scenario.

    Deterministic for a given config regardless of ``workers``; an
    infeasible configuration fails before any replicate runs.
    """
    sim = _resolve_model(config)
    truth = _truth(config, sim)
    seeds = np.random.SeedSequence(config.base_seed).spawn(max(config.replicates, 1))
    tasks = [(sim, config, truth, i, seeds[i]) for i in range(config.replicates)]
    if workers > 1 and len(tasks) > 1:
        with get_context("fork").Pool(workers) as pool:
            nested = pool.map(_run_replicate, tasks, chunksize=max(1, len(tasks) // (workers * 8)))
    else:
        nested = [_run_replicate(t) for t in tasks]
    records = tuple(record for batch in nested for record in batch)
    metrics = tuple(
        _aggregate(config, method, [r for r in records if r.method == method])
        for method in config.methods
    )
    return ScenarioResult(config=config, metrics=metrics, records=records)


# ---------------------------------------------------------------------------
# prevalence-misspecification sensitivity


@dataclass(frozen=True)
class SensitivityRecord:
    replicate: int
    multiplier: float
    analysis_prevalence: float
    converged: bool
    estimates: dict[str, float]
    biases: dict[str, float]
    rel_diffs: dict[str, float]  # vs the same replicate's multiplier-1.0 fit


@dataclass(frozen=True)
class SensitivityRow:
    multiplier: float
    parameter: str
    pairs: int
    mean_abs_rel_diff: Optional[float]
    median_abs_rel_diff: Optional[float]


@dataclass(frozen=True)
class SensitivityResult:
    config: ScenarioConfig
    multipliers: tuple[float, ...]
    rows: tuple[SensitivityRow, ...]
    records: tuple[SensitivityRecord, ...]


def _sensitivity_replicate(args) -> list[SensitivityRecord]:
    sim, config, truth, method, prevalences, rep_index, seed = args
    sim_stream, mask_stream = seed.spawn(2)
    rng = np.random.default_rng(sim_stream)
    complete = simulate.ascertain(
        sim, AscertainmentSpec(config.case_families, config.control_families, 0.0), rng=rng
    )
    if method == "lime-mix":
        counts = simulate.tabulate(
            simulate.mask_fathers(
                complete, config.missing_father_prob, np.random.default_rng(mask_stream)
            )
        )
        fixed = None
    else:  # lime-pair
        counts = simulate.tabulate(complete).drop_fathers()
        fixed = {"r_im": 1.0}
    fits = {}
    for multiplier, prevalence in prevalences:
        try:
            fits[multiplier] = likelihood.fit(
                counts, prevalence, fixed=fixed, options=config.options
            )
        except Exception:
            fits[multiplier] = None
    base = fits.get(1.0)
    out = []
    for multiplier, prevalence in prevalences:
        f = fits[multiplier]
        if f is None:
            out.append(
                SensitivityRecord(rep_index, multiplier, prevalence, False, {}, {}, {})
            )
            continue
        estimates = {k: v for k, v in f.estimates.items() if k in model.PARAM_NAMES}
        biases = {
            name: relative_bias(estimates[name], truth[name])
            for name in estimates
            if truth.get(name) not in (None, 0) and name in f.free
        }
        rel_diffs = {}
        if base is not None and base.converged:
            for name in f.free:
                ref = base.estimates[name]
                if ref != 0:
                    rel_diffs[name] = abs(estimates[name] - ref) / abs(ref)
        out.append(
            SensitivityRecord(
                rep_index, multiplier, prevalence, f.converged, estimates, biases, rel_diffs
            )
        )
    return out


def sensitivity_run(
    config: ScenarioConfig, multipliers: Sequence[float], *, workers: int = 1
) -> SensitivityResult:
    """Re-analyze the same simulated samples under misspecified prevalences.

    Every replicate is fitted once per multiplier (1.0, the correctly
    specified analysis, is always included) on identical counts, so the
    per-replicate comparisons are exactly paired.  Only the
    prevalence-consuming estimators make sense here: lime-mix (default)
    or lime-pair.
    """
    method = config.methods[0] if config.methods else "lime-mix"
    if method not in ("lime-mix", "lime-pair"):
        raise ConfigurationError(f"sensitivity analysis needs lime-mix or lime-pair, not {method!r}")
    mults = sorted(set(float(m) for m in multipliers) | {1.0})
    if any(m <= 0 for m in mults):
        raise ConfigurationError("prevalence multipliers must be positive")
    sim = _resolve_model(config)
    truth = _truth(config, sim)
    base_prev = config.effective_analysis_prevalence
    prevalences = []
    for m in mults:
        p = base_prev * m
        if not 0.0 < p < 1.0:
            raise ConfigurationError(f"multiplier {m} pushes the analysis prevalence to {p}")
        prevalences.append((m, p))

    seeds = np.random.SeedSequence(config.base_seed).spawn(max(config.replicates, 1))
    tasks = [
        (sim, config, truth, method, prevalences, i, seeds[i]) for i in range(config.replicates)
    ]
    if workers > 1 and len(tasks) > 1:
        with get_context("fork").Pool(workers) as pool:
            nested = pool.map(
                _sensitivity_replicate, tasks, chunksize=max(1, len(tasks) // (workers * 8))
            )
    else:
        nested = [_sensitivity_replicate(t) for t in tasks]
    records = tuple(record for batch in nested for record in batch)

    rows = []
    param_names = [n for n in model.PARAM_NAMES if n != "r_im" or method == "lime-mix"]
    for multiplier, _ in prevalences:
        subset = [r for r in records if r.multiplier == multiplier and r.converged]
        for name in param_names:
            diffs = [r.rel_diffs[name] for r in subset if name in r.rel_diffs]
            rows.append(
                SensitivityRow(
                    multiplier=multiplier,
                    parameter=name,
                    pairs=len(diffs),
                    mean_abs_rel_diff=mean(diffs) if diffs else None,
                    median_abs_rel_diff=median(diffs) if diffs else None,
                )
            )
    return SensitivityResult(config, tuple(m for m, _ in prevalences), tuple(rows), records)
