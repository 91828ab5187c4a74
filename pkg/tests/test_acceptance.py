"""Exit criteria. Each test records one PASS/FAIL line shown in the terminal summary."""

import math
import time

import numpy as np
import pytest

from hdvar.bayes import TwoPointHypothesis, bayes_rule, posterior_log_odds
from hdvar.cli import main
from hdvar.estimators import BoundInputs, conditional_bound_rhs
from hdvar.harness import (
    TABLE1_N,
    ScenarioConfig,
    run_bound_scaling_check,
    run_iid_prior_risk,
    run_moment_identity_check,
    run_repetition_study,
    run_scenario,
    run_table1,
    run_variance_check,
    table1_config,
    table1_hypothesis,
)
from oracles import quadrature_log_odds

pytestmark = pytest.mark.acceptance


def test_01_table1_reduced_grid(criterion):
    start = time.perf_counter()
    results = run_table1(replications=2000)
    elapsed = time.perf_counter() - start
    cell = {(r.config.n, c): r for r, (n, c) in
            zip(results, [(n, c) for n in TABLE1_N for c in range(1, 6)])}

    all_below_half = all(r.error_rate < 0.5 for r in results)
    violations = []
    for c in range(1, 6):
        for i, a in enumerate(TABLE1_N):
            for b in TABLE1_N[i + 1:]:
                ra, rb = cell[a, c], cell[b, c]
                pooled = math.hypot(ra.std_err, rb.std_err)
                if rb.error_rate > ra.error_rate + 3 * pooled:
                    violations.append((c, a, b))
    first = cell[100, 1].error_rate
    last = cell[1000, 5].error_rate
    ok = all_below_half and not violations and 0.30 <= first <= 0.48 and last <= 0.01
    criterion(1, ok, f"50 cells x 2000 reps in {elapsed:.0f}s; max={max(r.error_rate for r in results):.3f}; "
                     f"monotone violations={violations}; (100,col1)={first:.4f}; (1000,col5)={last:.4f}")
    assert ok


@pytest.mark.parametrize("n,column,target,tol", [(300, 3, 0.109, 0.06), (500, 2, 0.136, 0.05)])
def test_02_table1_spot_cells(criterion, n, column, target, tol):
    start = time.perf_counter()
    result = run_scenario(table1_config(n, column, 10_000))
    elapsed = time.perf_counter() - start
    ok = abs(result.error_rate - target) <= tol and elapsed <= 300
    criterion(2, ok, f"(n={n}, col{column}) error={result.error_rate:.4f} ({result.std_err:.4f}) "
                     f"vs {target}+-{tol}; {elapsed:.1f}s")
    assert ok


def test_03_figure1_reduced(criterion):
    start = time.perf_counter()
    config = ScenarioConfig(100, 100, table1_hypothesis(1), 2000, scenario_id="figure1/n=100/col=1")
    study = run_repetition_study(config, 200)
    elapsed = time.perf_counter() - start
    below = float(np.mean(study.error_rates < 0.5))
    ok = below == 1.0 and elapsed <= 900
    criterion(3, ok, f"200 designs x 2000 reps: fraction<0.5={below}; mean={study.error_rates.mean():.4f} "
                     f"max={study.error_rates.max():.4f}; {elapsed:.0f}s")
    assert ok


def test_04_lemma_flatness(criterion):
    rng = np.random.default_rng(404)
    worst = 0.0
    for _ in range(10_000):
        total = rng.uniform(0.05, 20.0)
        s0, s1 = rng.uniform(0.01, 0.99, 2) * total
        hyp = TwoPointHypothesis(total - s0, s0, total - s1, s1)
        y = rng.normal(0.0, rng.uniform(0.1, 10.0), rng.integers(1, 200))
        worst = max(worst, abs(posterior_log_odds(y, hyp).posterior0 - 0.5))
    ok = worst <= 1e-12
    criterion(4, ok, f"10000 equal-total instances: max |posterior0 - 1/2| = {worst:.2e}")
    assert ok


def test_05_y_only_bayes_vs_dicker(criterion):
    hyp = table1_hypothesis(1)
    config = table1_config(100, 1, 20_000)
    bayes_fixed_x = run_scenario(config, rule="bayes")
    bayes_iid = run_iid_prior_risk(lambda y: bayes_rule(y, hyp, on_degenerate="zero"), hyp, 100, 20_000)
    dicker = run_scenario(config)
    se = math.sqrt(0.25 / 20_000)
    ok = (abs(bayes_fixed_x.error_rate - 0.5) <= 3 * se and abs(bayes_iid.error_rate - 0.5) <= 3 * se
          and dicker.error_rate <= 0.48)
    criterion(5, ok, f"y-only Bayes risk {bayes_fixed_x.error_rate:.4f} (fixed X), {bayes_iid.error_rate:.4f} "
                     f"(iid means); Dicker risk {dicker.error_rate:.4f} at n=p=100")
    assert ok


def test_06_unbiasedness_and_variance(criterion):
    report = run_variance_check(400, 400, 1.0, 1.0, replications=20_000)
    mean_ok = abs(report.mean - 1.0) <= 3 * report.mean_se
    var_ok = abs(report.variance / report.formula - 1.0) <= 0.10
    ok = mean_ok and var_ok
    criterion(6, ok, f"mean={report.mean:.5f} (se {report.mean_se:.5f}); variance={report.variance:.5f} vs "
                     f"formula {report.formula:.5f} ({report.relative_gap:+.2%})")
    assert ok


def test_07_bound_scaling(criterion):
    report = run_bound_scaling_check(1.0, (100, 400, 1600), xi=0.5, sigma2=1.0, beta_norm2=1.0,
                                     replications=4000, C_max=10.0)
    fitted = report.fitted_C
    # bound at the nominal signal |mu|^2 = n |beta|^2 with the largest admissible constant
    under_rhs = all(
        r.exceedance <= conditional_bound_rhs(BoundInputs(1.0, r.n, r.n * 1.0, 1.0, 0.5), C=10.0)
        for r in report.rows
    )
    ok = report.strictly_decreasing and fitted <= 10.0 and under_rhs and report.passed
    probs = ", ".join(f"n={r.n}: {r.exceedance:.5f}" for r in report.rows)
    criterion(7, ok, f"exceedance {probs}; fitted C={fitted:.4f}; slope={report.slope:.4g} (se {report.slope_se:.2g})")
    assert ok


def test_08_moment_identities(criterion):
    beta = np.array([0.9, -0.4, 0.7, 0.2, -0.3])
    report = run_moment_identity_check(beta, draws=1_000_000, n=50, designs=10_000)
    ok = abs(report.fourth_z) <= 4 and abs(report.energy_z) <= 5
    criterion(8, ok, f"E(x'b)^4={report.fourth_moment:.4f} vs {report.fourth_target:.4f} (z={report.fourth_z:+.2f}); "
                     f"var(|Xb|^2/n)={report.energy_variance:.5f} vs {report.energy_variance_target:.5f} "
                     f"(z={report.energy_z:+.2f})")
    assert ok


def test_09_quadrature_equivalence(criterion):
    rng = np.random.default_rng(909)
    worst = 0.0
    for _ in range(1000):
        hyp = TwoPointHypothesis(*rng.uniform(0.1, 5.0, 4))
        y = rng.normal(0.0, math.sqrt(hyp.total0 if rng.random() < 0.5 else hyp.total1), rng.integers(1, 21))
        worst = max(worst, abs(posterior_log_odds(y, hyp).log_odds - quadrature_log_odds(y, hyp)))
    ok = worst <= 1e-8
    criterion(9, ok, f"1000 instances, n<=20: max |closed form - quadrature| = {worst:.2e}")
    assert ok


def _body(path):
    return "".join(line for line in path.read_text(encoding="utf-8").splitlines(True) if not line.startswith("#"))


def test_10_thread_independence(criterion, tmp_path):
    args = ["table1", "--rows", "100,300", "--cols", "1,4", "--replications", "2000"]
    assert main(args + ["--threads", "1", "--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--threads", "4", "--out", str(tmp_path / "b")]) == 0
    fig = ["figure1", "--designs", "6", "--replications", "1000"]
    assert main(fig + ["--threads", "1", "--out", str(tmp_path / "a")]) == 0
    assert main(fig + ["--threads", "3", "--out", str(tmp_path / "b")]) == 0
    names = ["table1.csv", "figure1_raw.csv", "figure1_hist.csv"]
    same = all(_body(tmp_path / "a" / f).encode() == _body(tmp_path / "b" / f).encode() for f in names)
    criterion(10, same, f"byte-identical CSV bodies for threads 1 vs 4/3: {names}")
    assert same
