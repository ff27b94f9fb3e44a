import math

import numpy as np
import pytest
from scipy.stats import chi2

from epifam import likelihood as lik
from epifam import model, simulate
from epifam.counts import CountsTable
from epifam.likelihood import (
    DegenerateDataError,
    Hypothesis,
    association,
    cell_case_prob_pair,
    cell_case_prob_triad,
    fit,
    fit_and_test,
    hypothesis_from_label,
    imprinting,
    lrt,
    maternal,
    partial_loglik,
)
from epifam.model import MatingTypeDistribution, RiskParameters
from epifam._optim import FitOptions

from conftest import random_feasible_params, random_mating
from oracles import conditional_case_probs

FAST = FitOptions(starts=3, max_iterations=1500)


def hwe_mu(vaf=0.3):
    p = [(1 - vaf) ** 2, 2 * vaf * (1 - vaf), vaf**2]
    return MatingTypeDistribution.from_margins(p, p)


def expected_counts(sim, n_triads, n_pairs, scale=10**6):
    """Noise-free multinomial expectations, scaled to large integers."""
    table = sim.joint_table()
    prev = sim.prevalence
    return CountsTable.from_cells(
        np.rint(table.triad_case / prev * n_triads * scale).astype(int),
        np.rint(table.triad_control / (1 - prev) * n_triads * scale).astype(int),
        np.rint(table.pair_case / prev * n_pairs * scale).astype(int),
        np.rint(table.pair_control / (1 - prev) * n_pairs * scale).astype(int),
    )


def simulated_counts(risks, seed, n=150, vaf=0.3, prevalence=0.05, missing=0.5):
    sim = simulate.SimulationModel.from_prevalence(
        simulate.PopulationModel.hwe(vaf), prevalence, **risks
    )
    rng = np.random.default_rng(seed)
    recs = simulate.ascertain(sim, simulate.AscertainmentSpec(n, n, 0.0), rng=rng)
    recs = simulate.mask_fathers(recs, missing, rng)
    return simulate.tabulate(recs), sim


class TestCellCaseProbs:
    def test_triad_no_effect_reduces_to_design_share(self):
        params = RiskParameters(delta=0.05)
        for t in model.TRIAD_TYPES:
            p = cell_case_prob_triad(params, 0.05, 120, 200, t)
            assert p == pytest.approx(120 / 320, abs=1e-15)

    def test_pair_no_effect_reduces_to_design_share(self):
        params = RiskParameters(delta=0.05)
        for pair in model.PAIR_TYPES:
            if pair.excluded:
                continue
            p = cell_case_prob_pair(params, 0.05, 75, 25, pair)
            assert p == pytest.approx(0.75, abs=1e-15)

    def test_pair_22_worked_value(self):
        # delta*s2*r2 = 0.3 against 0.7, weighted by prevalence 0.05: 57/64
        params = RiskParameters(delta=0.05, r2=3, s2=2)
        pair = model.PAIR_BY_GENOTYPES[(2, 2)]
        p = cell_case_prob_pair(params, 0.05, 150, 150, pair)
        assert p == pytest.approx(57 / 64, abs=1e-12)
        assert p == pytest.approx(0.890625, abs=1e-12)

    def test_excluded_pair_rejected(self):
        params = RiskParameters(delta=0.05)
        with pytest.raises(ValueError):
            cell_case_prob_pair(params, 0.05, 10, 10, model.EXCLUDED_PAIR)

    def test_type8_matches_types_6_and_10_without_imprinting(self):
        params = RiskParameters(delta=0.03, r1=2.0, r_im=1.0, s1=1.4)
        values = [
            cell_case_prob_triad(params, 0.05, 100, 140, model.TRIAD_TYPES[i - 1])
            for i in (6, 8, 10)
        ]
        assert values[0] == pytest.approx(values[1], abs=1e-15)
        assert values[1] == pytest.approx(values[2], abs=1e-15)

    def test_mating_distribution_cancels(self, rng):
        # brute-force conditionals agree across mating tables and with the
        # mating-free implementation
        for _ in range(25):
            params = random_feasible_params(rng)
            prevalence = float(rng.uniform(0.01, 0.3))
            n1, n0 = 137, 89
            reference = None
            for _ in range(4):
                mu = random_mating(rng)
                oracle = conditional_case_probs(
                    (params.delta, params.r1, params.r2, params.r_im, params.s1, params.s2),
                    mu.mu, prevalence, n1, n0,
                )
                if reference is None:
                    reference = oracle
                else:
                    np.testing.assert_allclose(oracle["triad"], reference["triad"], atol=1e-12, rtol=0)
                    pair_mask = [not p.excluded for p in model.PAIR_TYPES]
                    np.testing.assert_allclose(
                        oracle["pair"][pair_mask], reference["pair"][pair_mask], atol=1e-12, rtol=0
                    )
            for t in model.TRIAD_TYPES:
                assert cell_case_prob_triad(params, prevalence, n1, n0, t) == pytest.approx(
                    reference["triad"][t.index - 1], abs=1e-12
                )
            for p in model.PAIR_TYPES:
                if not p.excluded:
                    assert cell_case_prob_pair(params, prevalence, n1, n0, p) == pytest.approx(
                        reference["pair"][p.index - 1], abs=1e-12
                    )

    def test_prevalence_validation(self):
        params = RiskParameters(delta=0.05)
        with pytest.raises(ValueError):
            cell_case_prob_triad(params, 0.0, 10, 10, model.TRIAD_TYPES[0])


class TestPartialLoglik:
    def test_empty_counts_give_zero(self):
        counts = CountsTable.from_cells()
        assert partial_loglik(RiskParameters(delta=0.1), counts, 0.1) == 0.0

    def test_balanced_no_effect_design_gives_half_per_family(self, rng):
        case_triads = rng.integers(0, 20, 15)
        case_pairs = rng.integers(0, 20, 7)
        counts = CountsTable.from_cells(case_triads, case_triads, case_pairs, case_pairs)
        params = RiskParameters(delta=0.05)
        included = 2 * (int(case_triads.sum()) + int(case_pairs.sum()) - int(case_pairs[3]))
        assert partial_loglik(params, counts, 0.05) == pytest.approx(
            included * math.log(0.5), rel=1e-12
        )

    def test_matches_cellwise_reimplementation(self, rng):
        for _ in range(10):
            params = random_feasible_params(rng)
            prevalence = float(rng.uniform(0.02, 0.2))
            counts = CountsTable.from_cells(
                rng.integers(0, 30, 15), rng.integers(0, 30, 15),
                rng.integers(0, 30, 7), rng.integers(0, 30, 7),
            )
            expected = 0.0
            for t in model.TRIAD_TYPES:
                p = cell_case_prob_triad(
                    params, prevalence, counts.total_case_triads, counts.total_control_triads, t
                )
                n1, n0 = counts.case_triads[t.index - 1], counts.control_triads[t.index - 1]
                expected += n1 * math.log(p) + n0 * math.log(1 - p)
            for pr in model.PAIR_TYPES:
                if pr.excluded:
                    continue
                p = cell_case_prob_pair(
                    params, prevalence, counts.total_case_pairs, counts.total_control_pairs, pr
                )
                n1, n0 = counts.case_pairs[pr.index - 1], counts.control_pairs[pr.index - 1]
                expected += n1 * math.log(p) + n0 * math.log(1 - p)
            assert partial_loglik(params, counts, prevalence) == pytest.approx(expected, rel=1e-12)

    def test_pairs_only_and_triads_only_supported(self, rng):
        params = random_feasible_params(rng)
        triads_only = CountsTable.from_cells(rng.integers(1, 9, 15), rng.integers(1, 9, 15))
        pairs_only = CountsTable.from_cells(None, None, rng.integers(1, 9, 7), rng.integers(1, 9, 7))
        assert math.isfinite(partial_loglik(params, triads_only, 0.05))
        assert math.isfinite(partial_loglik(params, pairs_only, 0.05))


class TestFit:
    def test_exact_recovery_on_expected_counts(self):
        sim = simulate.SimulationModel.from_prevalence(
            simulate.PopulationModel.hwe(0.3), 0.05, r1=2, r2=3
        )
        counts = expected_counts(sim, 1, 1)
        result = fit(counts, 0.05)
        truth = sim.component_params[0].as_dict()
        for name, value in truth.items():
            assert result.estimates[name] == pytest.approx(value, rel=2e-3)
        assert result.converged

    def test_null_recovery_loose_at_moderate_scale(self):
        counts, sim = simulated_counts({}, seed=11, n=2000)
        result = fit(counts, 0.05, options=FAST)
        for name in model.RISK_NAMES:
            assert abs(math.log(result.estimates[name])) < math.log(1.35)
        assert result.estimates["delta"] == pytest.approx(0.05, rel=0.25)

    def test_consistency_at_large_scale(self):
        counts, sim = simulated_counts(dict(r1=2, r2=3), seed=5, n=5000)
        result = fit(counts, 0.05)
        truth = sim.component_params[0].as_dict()
        for name, value in truth.items():
            assert result.estimates[name] == pytest.approx(value, rel=0.10), name

    def test_pairs_only_with_imprinting_pinned(self):
        sim = simulate.SimulationModel.from_prevalence(
            simulate.PopulationModel.hwe(0.3), 0.05, r1=2, r2=3, s1=1.5, s2=2
        )
        counts = expected_counts(sim, 0, 1)
        result = fit(counts, 0.05, fixed={"r_im": 1.0})
        assert result.free == ("delta", "r1", "r2", "s1", "s2")
        assert result.estimates["r_im"] == 1.0
        for name in ("r1", "r2", "s1", "s2", "delta"):
            truth = getattr(sim.component_params[0], name)
            assert result.estimates[name] == pytest.approx(truth, rel=5e-3), name

    def test_fit_maximum_dominates_truth(self):
        for seed in range(6):
            counts, sim = simulated_counts(dict(r1=2, r2=3), seed=seed)
            result = fit(counts, 0.05)
            at_truth = partial_loglik(sim.component_params[0], counts, 0.05)
            assert result.loglik >= at_truth - 1e-6

    def test_degenerate_all_zero(self):
        with pytest.raises(DegenerateDataError):
            fit(CountsTable.from_cells(), 0.05)

    def test_degenerate_only_excluded_pairs(self):
        pairs = [0] * 7
        pairs[3] = 25
        with pytest.raises(DegenerateDataError):
            fit(CountsTable.from_cells(None, None, pairs, pairs), 0.05)

    def test_boundary_is_flagged_not_raised(self):
        case = [0] * 15
        control = [0] * 15
        case[14] = 50  # affected families all doubly homozygous
        control[0] = 50
        result = fit(CountsTable.from_cells(case, control), 0.05, options=FAST)
        assert "r2" in result.at_boundary or "s2" in result.at_boundary

    def test_excluded_cells_reporting(self):
        counts, _ = simulated_counts({}, seed=2, n=40)
        result = fit(counts, 0.05, options=FAST)
        assert "pair_1_1" in result.excluded_cells
        for label in result.excluded_cells:
            assert label.startswith(("triad_", "pair_"))

    def test_delta_cannot_be_pinned(self):
        counts, _ = simulated_counts({}, seed=3, n=40)
        with pytest.raises(ValueError):
            fit(counts, 0.05, fixed={"delta": 0.05})


class TestHypotheses:
    def test_registry(self):
        assert hypothesis_from_label("association").pinned == association().pinned
        assert dict(imprinting().pinned) == {"r_im": 1.0}
        assert dict(maternal().pinned) == {"s1": 1.0, "s2": 1.0}
        with pytest.raises(ValueError):
            hypothesis_from_label("linkage")

    def test_sidedness_restricted_to_imprinting(self):
        assert imprinting("greater").sided == "greater"
        with pytest.raises(ValueError):
            Hypothesis("maternal", (("s1", 1.0),), sided="greater")

    def test_non_risk_pin_rejected(self):
        with pytest.raises(ValueError):
            Hypothesis("association", (("delta", 0.5),))


class TestLrt:
    def test_degrees_of_freedom(self):
        counts, _ = simulated_counts(dict(r1=2, r2=3), seed=7)
        full, tests = fit_and_test(
            counts, 0.05, [association(), imprinting(), maternal()], options=FAST
        )
        assert tests["association"].df == 5
        assert tests["imprinting"].df == 1
        assert tests["maternal"].df == 2

    def test_pair_analysis_association_df_is_four(self):
        counts, _ = simulated_counts(dict(r1=2, r2=3), seed=7, missing=1.0)
        result = lrt(counts, 0.05, association(), fixed={"r_im": 1.0}, options=FAST)
        assert result.df == 4

    def test_imprinting_needs_free_r_im(self):
        counts, _ = simulated_counts({}, seed=7, missing=1.0)
        with pytest.raises(ValueError):
            lrt(counts, 0.05, imprinting(), fixed={"r_im": 1.0}, options=FAST)

    def test_statistic_nonnegative_and_p_in_unit_interval(self):
        for seed in range(5):
            counts, _ = simulated_counts(dict(r_im=2.0), seed=seed, n=120)
            result = lrt(counts, 0.05, imprinting(), options=FAST)
            assert result.statistic >= 0.0
            assert 0.0 <= result.p_value <= 1.0

    def test_null_data_give_zero_statistic(self):
        sim = simulate.SimulationModel.from_prevalence(simulate.PopulationModel.hwe(0.3), 0.05)
        counts = expected_counts(sim, 1, 1)
        result = lrt(counts, 0.05, maternal())
        assert result.statistic == pytest.approx(0.0, abs=1e-5)
        assert result.p_value > 0.999

    def test_one_sided_convention(self):
        two = chi2.sf(4.0, 1)
        above = {"r_im": 1.7}
        below = {"r_im": 0.6}
        assert lik._p_value(4.0, 1, imprinting("greater"), above) == pytest.approx(two / 2)
        assert lik._p_value(4.0, 1, imprinting("greater"), below) == pytest.approx(1 - two / 2)
        assert lik._p_value(4.0, 1, imprinting("less"), below) == pytest.approx(two / 2)
        assert lik._p_value(4.0, 1, imprinting("less"), above) == pytest.approx(1 - two / 2)
        assert lik._p_value(0.0, 2, maternal(), above) == 1.0
