import math
from dataclasses import replace

import numpy as np
import pytest

from hdvar.bayes import TwoPointHypothesis, dicker_rule
from hdvar.harness import (
    TABLE1_COLUMNS,
    ScenarioConfig,
    binomial_se,
    run_bound_scaling_check,
    run_moment_identity_check,
    run_repetition_study,
    run_scenario,
    run_variance_check,
    scenario_design,
    table1_config,
    table1_hypothesis,
)
from hdvar.model import Dataset, DesignMatrix


def test_table1_columns_have_equal_totals():
    for col in range(1, len(TABLE1_COLUMNS) + 1):
        hyp = table1_hypothesis(col)
        assert hyp.equal_totals and hyp.ordered


class TestScenarioConfig:
    def test_odd_replications_rejected(self):
        with pytest.raises(ValueError):
            replace(table1_config(100, 1, 100), replications=101)

    def test_reversed_ordering_rejected(self):
        with pytest.raises(ValueError):
            ScenarioConfig(10, 10, TwoPointHypothesis(1.0, 2.0, 1.0, 1.0), 10)

    def test_design_is_standardized(self):
        x = scenario_design(table1_config(50, 1, 10))
        np.testing.assert_allclose((x**2).sum(axis=1), 50, rtol=1e-12)
        np.testing.assert_allclose(x.sum(axis=1), 0, atol=1e-9 * 50)


class TestRunScenario:
    def test_matches_per_replication_reference(self):
        # scalar re-derivation of each replication through the public single-dataset API
        config = table1_config(30, 2, replications=200)
        x = scenario_design(config)
        hyp = config.hyp
        errors = 0
        for r in range(config.replications):
            j = 0 if r < 100 else 1
            eta2, s2 = (hyp.eta0_2, hyp.sigma0_2) if j == 0 else (hyp.eta1_2, hyp.sigma1_2)
            rng = config.replication_seed(r).generator()
            beta = math.sqrt(eta2 / 30) * rng.standard_normal(30)
            y = x @ beta + math.sqrt(s2) * rng.standard_normal(30)
            errors += dicker_rule(Dataset(DesignMatrix(x), y), hyp.sigma0_2, hyp.sigma1_2) != j
        assert run_scenario(config).errors == errors

    def test_smallest_separation_n100(self):
        result = run_scenario(table1_config(100, 1))
        assert 0.30 <= result.error_rate <= 0.48

    def test_largest_separation_n1000(self):
        assert run_scenario(table1_config(1000, 5)).error_rate <= 0.005

    def test_identical_components_are_a_coin_flip(self):
        config = ScenarioConfig(100, 100, TwoPointHypothesis(1.0, 1.0, 1.0, 1.0), 4000, scenario_id="same")
        result = run_scenario(config)
        assert abs(result.error_rate - 0.5) <= 3 * binomial_se(0.5, result.replications)

    def test_standard_error_is_binomial(self):
        result = run_scenario(table1_config(100, 3, 2000))
        assert result.std_err == math.sqrt(result.error_rate * (1 - result.error_rate) / 2000)
        assert result.errors == round(result.error_rate * 2000)

    def test_bayes_rule_at_equal_totals_is_half(self):
        result = run_scenario(table1_config(100, 1, 2000), rule="bayes")
        assert result.error_rate == 0.5

    def test_bayes_rule_unequal_totals_uses_y(self):
        config = ScenarioConfig(100, 100, TwoPointHypothesis(1.0, 1.0, 2.0, 2.0), 2000, scenario_id="uneq")
        assert run_scenario(config, rule="bayes").error_rate < 0.2

    def test_unknown_rule(self):
        with pytest.raises(ValueError):
            run_scenario(table1_config(10, 1, 10), rule="oracle")

    @pytest.mark.parametrize("threads", [1, 2, 5])
    def test_thread_count_does_not_matter(self, threads):
        config = table1_config(120, 2, 3000)
        assert run_scenario(config, threads=threads) == run_scenario(config, threads=1)


class TestRepetitionStudy:
    def test_single_design_equals_scenario(self):
        config = table1_config(100, 1, 1000)
        study = run_repetition_study(config, 1)
        single = run_scenario(replace(config, scenario_id=f"{config.scenario_id}#0"))
        assert study.error_rates.tolist() == [single.error_rate]
        assert study.design_seeds == (single.design_seed,)

    def test_designs_differ(self):
        study = run_repetition_study(table1_config(60, 1, 500), 5)
        assert len(study.error_rates) == study.designs == 5
        assert len(set(study.design_seeds)) == 5

    def test_invalid_designs(self):
        with pytest.raises(ValueError):
            run_repetition_study(table1_config(60, 1, 500), 0)

    @pytest.mark.slow
    def test_mean_over_designs_n300(self):
        study = run_repetition_study(table1_config(300, 3, 10_000), 50)
        assert abs(study.error_rates.mean() - 0.109) <= 0.05


class TestVarianceCheck:
    def test_smoke(self):
        report = run_variance_check(50, 60, 1.0, 0.5, replications=1000)
        assert np.isfinite([report.mean, report.variance, report.formula]).all()
        assert not report.variance_checked and report.passed == report.mean_ok

    def test_no_signal_mean_n400(self):
        report = run_variance_check(400, 400, 1.0, 0.0, replications=2000)
        assert report.mean_ok
        assert abs(report.mean - 1.0) <= 3 * report.mean_se

    def test_too_few_replications(self):
        with pytest.raises(ValueError):
            run_variance_check(10, 10, 1.0, 1.0, replications=999)


class TestBoundCheck:
    def test_decreasing_exceedance(self):
        report = run_bound_scaling_check(1.0, (50, 200, 800), xi=0.5, replications=3000)
        assert report.strictly_decreasing and report.passed

    def test_huge_xi_never_exceeded(self):
        report = run_bound_scaling_check(1.0, (100, 400, 1600), xi=100.0, replications=500)
        assert all(r.exceedance == 0 for r in report.rows)
        assert report.passed

    def test_single_n(self):
        report = run_bound_scaling_check(2.0, [80], xi=0.5, replications=500)
        row = report.rows[0]
        assert row.p == 160 and np.isfinite([row.exceedance, row.ratio, row.g_mean]).all()

    @pytest.mark.parametrize("grid", [[], [100, 100], [400, 100]])
    def test_invalid_grid(self, grid):
        with pytest.raises(ValueError):
            run_bound_scaling_check(1.0, grid, xi=0.5)


class TestMomentCheck:
    @pytest.mark.parametrize("beta,target", [
        ([1.0, 0.0, 0.0], 3.0),
        ([1 / math.sqrt(2), 1 / math.sqrt(2)], 3.0),
        ([1.0, 1.0], 12.0),
    ])
    def test_targets(self, beta, target):
        report = run_moment_identity_check(beta, draws=200_000, designs=2000)
        assert report.fourth_target == pytest.approx(target)
        assert report.passed
        assert report.excess_fourth == pytest.approx(report.fourth_moment - report.beta_norm2**2)

    def test_zero_draws(self):
        with pytest.raises(ValueError):
            run_moment_identity_check([1.0], draws=0)
