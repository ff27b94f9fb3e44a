import pytest

from epifam import experiments as ex
from epifam._optim import FitOptions
from epifam.simulate import ConfigurationError, PopulationComponent, PopulationModel, mixture_population

FAST = FitOptions(starts=2, max_iterations=1200)


def small_config(**overrides):
    base = dict(
        population=PopulationModel.hwe(0.3),
        prevalence=0.05,
        risk_setting=1,
        case_families=60,
        control_families=60,
        missing_father_prob=0.5,
        methods=("lime-mix",),
        replicates=3,
        base_seed=(99, 0),
        options=FAST,
    )
    base.update(overrides)
    return ex.ScenarioConfig(**base)


class TestTable2:
    def test_settings_resolve_exactly(self):
        expected = {
            1: (1, 1, 1, 1, 1),
            2: (2, 3, 1, 1, 1),
            3: (1, 3, 1, 1, 1),
            4: (1, 3, 1, 2, 2),
            5: (1, 3, 3, 1, 1),
            6: (3, 3, 1 / 3, 1, 1),
            7: (1, 3, 3, 2, 2),
            8: (3, 3, 1 / 3, 2, 2),
        }
        for setting, (r1, r2, r_im, s1, s2) in expected.items():
            risks = ex.TABLE2_SETTINGS[setting]
            assert (risks["r1"], risks["r2"], risks["r_im"], risks["s1"], risks["s2"]) == (
                r1, r2, r_im, s1, s2,
            )


class TestRelativeBias:
    def test_examples(self):
        assert ex.relative_bias(2.2, 2.0) == pytest.approx(0.1)
        assert ex.relative_bias(3.0, 3.0) == 0.0
        assert ex.relative_bias(0.3, 1 / 3) == pytest.approx(-0.1)

    def test_zero_truth_rejected(self):
        with pytest.raises(ValueError):
            ex.relative_bias(1.0, 0.0)


class TestScenarioConfig:
    def test_requires_exactly_one_risk_spec(self):
        with pytest.raises(ConfigurationError):
            small_config(risk_setting=None, risks=None)
        with pytest.raises(ConfigurationError):
            small_config(risks={"r1": 2.0})

    def test_unknown_method_rejected(self):
        with pytest.raises(ConfigurationError):
            small_config(methods=("lime-mix", "bogus"))

    def test_custom_risks(self):
        cfg = small_config(risk_setting=None, risks={"r1": 2.5})
        assert cfg.resolved_risks() == {"r1": 2.5, "r2": 1.0, "r_im": 1.0, "s1": 1.0, "s2": 1.0}
        assert cfg.setting_label == "custom"

    def test_labels(self):
        assert ex.population_label(PopulationModel.hwe(0.3)) == "hwe"
        assert ex.population_label(PopulationModel.inbred(0.3, 0.1, 0.3)) == "inbred(zm=0.1,zf=0.3)"
        mix = mixture_population(
            [PopulationComponent(0.1, weight=0.5), PopulationComponent(0.3, weight=0.5)]
        )
        assert ex.vaf_label(mix) == "0.1+0.3"
        assert ex.population_label(mix).startswith("mix[")

    def test_marginal_prevalence_with_component_overrides(self):
        mix = mixture_population(
            [
                PopulationComponent(0.3, weight=0.5, prevalence=0.05),
                PopulationComponent(0.3, weight=0.5, prevalence=0.15),
            ]
        )
        cfg = small_config(population=mix)
        assert cfg.marginal_prevalence == pytest.approx(0.10)
        assert cfg.effective_analysis_prevalence == pytest.approx(0.10)


class TestRunScenario:
    def test_zero_replicates(self):
        result = ex.run_scenario(small_config(replicates=0))
        assert result.records == ()
        assert result.metrics[0].converged == 0
        assert result.metrics[0].failures == 0

    def test_infeasible_config_fails_before_running(self):
        cfg = small_config(
            risk_setting=None, risks={"r2": 6.0, "s2": 6.0}, prevalence=0.4,
            population=PopulationModel.hwe(0.1),
        )
        with pytest.raises(ConfigurationError):
            ex.run_scenario(cfg)

    def test_deterministic_and_worker_independent(self):
        cfg = small_config(methods=("lime-mix", "ll-lrt"))
        a = ex.run_scenario(cfg, workers=1)
        b = ex.run_scenario(cfg, workers=2)
        assert a.records == b.records
        assert a.metrics == b.metrics

    def test_method_subsets_share_underlying_families(self):
        both = ex.run_scenario(small_config(methods=("lime-mix", "cll")))
        cll_only = ex.run_scenario(small_config(methods=("cll",)))
        assert tuple(r for r in both.records if r.method == "cll") == cll_only.records

    def test_metrics_row_contents(self):
        result = ex.run_scenario(small_config(risk_setting=2, methods=("lime-mix", "ll-lrt")))
        by_method = {m.method: m for m in result.metrics}
        lime = by_method["lime-mix"]
        assert lime.replicates == 3
        assert lime.converged + lime.failures == 3
        assert lime.rejection_rates["imprinting"] is not None
        assert lime.bias_median["r1"] is not None
        ll = by_method["ll-lrt"]
        assert ll.bias_median["delta"] is None  # not estimated there
        for rate in ll.rejection_rates.values():
            assert rate is None or 0.0 <= rate <= 1.0

    def test_mixture_scenario_runs(self):
        mix = mixture_population(
            [
                PopulationComponent(0.3, weight=0.5, prevalence=0.05),
                PopulationComponent(0.3, weight=0.5, prevalence=0.15),
            ]
        )
        result = ex.run_scenario(small_config(population=mix, replicates=2))
        assert result.metrics[0].analysis_prevalence == pytest.approx(0.10)
        # no single true phenocopy rate in a mixture
        assert result.metrics[0].bias_median["delta"] is None
        assert result.metrics[0].bias_median["r1"] is not None


class TestSensitivity:
    def test_multiplier_one_is_the_baseline(self):
        result = ex.sensitivity_run(small_config(replicates=2), [0.8, 1.2], workers=2)
        assert result.multipliers == (0.8, 1.0, 1.2)
        for record in result.records:
            if record.multiplier == 1.0 and record.converged:
                assert all(v == 0.0 for v in record.rel_diffs.values())

    def test_risk_estimates_much_less_sensitive_than_delta(self):
        result = ex.sensitivity_run(small_config(replicates=3), [1.2])
        rows = {(r.multiplier, r.parameter): r for r in result.rows}
        delta_shift = rows[(1.2, "delta")].median_abs_rel_diff
        risk_shift = rows[(1.2, "r2")].median_abs_rel_diff
        assert delta_shift > 0.1  # tracks the assumed prevalence almost proportionally
        assert risk_shift < delta_shift / 3

    def test_rare_disease_extension_five_fold_asymmetry(self):
        # at a 1% disease, a five-fold prevalence understatement leaves the risk
        # estimates closely tracking the baseline, while a five-fold
        # overstatement moves them more
        cfg = small_config(
            risk_setting=2, prevalence=0.01, replicates=8,
            case_families=100, control_families=100, base_seed=(99, 5),
        )
        result = ex.sensitivity_run(cfg, [0.2, 5.0])
        rows = {(r.multiplier, r.parameter): r.median_abs_rel_diff for r in result.rows}
        assert rows[(0.2, "r2")] < 0.1
        assert rows[(5.0, "r2")] > rows[(0.2, "r2")]

    def test_rejects_prevalence_free_method(self):
        with pytest.raises(ConfigurationError):
            ex.sensitivity_run(small_config(methods=("ll-lrt",)), [0.8])

    def test_rejects_bad_multipliers(self):
        with pytest.raises(ConfigurationError):
            ex.sensitivity_run(small_config(), [-0.5])
        with pytest.raises(ConfigurationError):
            ex.sensitivity_run(small_config(), [25.0])
