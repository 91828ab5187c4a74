"""Monte Carlo experiments around Dicker's estimator.

Each replication draws from its own seeded stream, and replications are
grouped into fixed-size chunks that may run on worker threads. Chunk
boundaries never depend on the worker count, and error counts are summed as
integers, so results are identical for any ``threads`` value.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from hdvar.bayes import TwoPointHypothesis, log_odds_from_sum_squares
from hdvar.estimators import (
    BoundInputs,
    dicker_from_moments,
    dicker_variance_formula,
    theorem_bound_g,
)
from hdvar.model import (
    sample_beta_fixed_norm,
    sample_design,
    standardize_array,
)
from hdvar.seeding import DEFAULT_MASTER_SEED, SeedSpec

CHUNK_SIZE = 256

# Grid of the published experiment: n = p, hypothesis 0 fixed at (1, 1).
TABLE1_N = tuple(range(100, 1001, 100))
TABLE1_NULL = (1.0, 1.0)
TABLE1_COLUMNS = (
    (5 / 6, 7 / 6),
    (4 / 6, 8 / 6),
    (3 / 6, 9 / 6),
    (2 / 6, 10 / 6),
    (1 / 6, 11 / 6),
)
# Published estimates (10,000 replications per cell), rows n = 100..1000.
TABLE1_REFERENCE = {
    100: (0.396, 0.318, 0.236, 0.178, 0.123),
    200: (0.363, 0.251, 0.154, 0.093, 0.046),
    300: (0.338, 0.198, 0.109, 0.05, 0.02),
    400: (0.31, 0.177, 0.074, 0.029, 0.008),
    500: (0.293, 0.136, 0.054, 0.017, 0.004),
    600: (0.279, 0.123, 0.041, 0.01, 0.002),
    700: (0.267, 0.1, 0.028, 0.006, 0.0),
    800: (0.248, 0.086, 0.021, 0.004, 0.0),
    900: (0.238, 0.07, 0.017, 0.002, 0.0),
    1000: (0.219, 0.064, 0.011, 0.002, 0.0),
}


def table1_hypothesis(column: int) -> TwoPointHypothesis:
    """Hypothesis pair for 1-based Table 1 column ``column``."""
    eta1, sig1 = TABLE1_COLUMNS[column - 1]
    return TwoPointHypothesis(*TABLE1_NULL, eta1, sig1)


def binomial_se(rate: float, count: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / count)


def _run_tasks(fn: Callable, tasks: Sequence, threads: int | None) -> list:
    workers = threads or os.cpu_count() or 1
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def _chunks(total: int, size: int = CHUNK_SIZE) -> list[tuple[int, int]]:
    return [(start, min(start + size, total)) for start in range(0, total, size)]


def _column_norm2(a: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->j", a, a)


# --------------------------------------------------------------------------
# Table 1 scenarios


@dataclass(frozen=True)
class ScenarioConfig:
    n: int
    p: int
    hyp: TwoPointHypothesis
    replications: int = 10_000
    master_seed: int = DEFAULT_MASTER_SEED
    scenario_id: str = "scenario"

    def __post_init__(self):
        if self.n < 1 or self.p < 2:
            raise ValueError(f"need n >= 1 and p >= 2, got n={self.n}, p={self.p}")
        if self.replications < 2 or self.replications % 2:
            raise ValueError(f"replications must be a positive even number, got {self.replications}")
        if self.hyp.sigma1_2 < self.hyp.sigma0_2:
            raise ValueError("hypothesis must satisfy sigma1_2 >= sigma0_2")

    @property
    def design_seed(self) -> SeedSpec:
        return SeedSpec(self.master_seed, self.scenario_id).child("design")

    def replication_seed(self, r: int) -> SeedSpec:
        return SeedSpec(self.master_seed, self.scenario_id, r)


@dataclass(frozen=True)
class ScenarioResult:
    error_rate: float
    std_err: float
    replications: int
    config: ScenarioConfig
    errors: int
    design_seed: int


def scenario_design(config: ScenarioConfig) -> np.ndarray:
    """The fixed standardized design of a scenario."""
    x = sample_design(config.n, config.p, config.design_seed).entries
    return standardize_array(x)


def _scenario_chunk(x: np.ndarray, config: ScenarioConfig, rule: str, start: int, stop: int) -> int:
    n, p = x.shape
    hyp = config.hyp
    half = config.replications // 2
    k = stop - start
    betas = np.empty((p, k))
    noise = np.empty((n, k))
    labels = np.empty(k, dtype=np.int8)
    for col, r in enumerate(range(start, stop)):
        j = 0 if r < half else 1
        eta2, sigma2 = (hyp.eta0_2, hyp.sigma0_2) if j == 0 else (hyp.eta1_2, hyp.sigma1_2)
        rng = config.replication_seed(r).generator()
        betas[:, col] = math.sqrt(eta2 / p) * rng.standard_normal(p)
        noise[:, col] = math.sqrt(sigma2) * rng.standard_normal(n)
        labels[col] = j
    y = x @ betas + noise
    y_norm2 = _column_norm2(y)
    if rule == "dicker":
        estimates = dicker_from_moments(y_norm2, _column_norm2(x.T @ y), n, p)
        decisions = estimates > 0.5 * (hyp.sigma0_2 + hyp.sigma1_2)
    elif hyp.equal_totals:
        decisions = np.zeros(k, dtype=bool)
    else:
        decisions = log_odds_from_sum_squares(y_norm2, n, hyp) < 0
    return int(np.count_nonzero(decisions.astype(np.int8) != labels))


def run_scenario(
    config: ScenarioConfig, threads: int | None = None, rule: str = "dicker"
) -> ScenarioResult:
    """Conditional error of a decision rule with the design held fixed.

    One standardized design is drawn per scenario. Replication r < R/2 uses
    hypothesis 0, the rest hypothesis 1; each draws beta ~ N(0, eta_J^2/p I)
    and eps ~ N(0, sigma_J^2 I). ``rule`` is ``"dicker"`` (midpoint rule on
    Dicker's estimate) or ``"bayes"`` (the y-only posterior-odds rule, ties
    and equal totals decided as 0).
    """
    if rule not in ("dicker", "bayes"):
        raise ValueError(f"unknown rule {rule!r}")
    x = scenario_design(config)
    counts = _run_tasks(
        lambda span: _scenario_chunk(x, config, rule, *span),
        _chunks(config.replications),
        threads,
    )
    errors = sum(counts)
    rate = errors / config.replications
    return ScenarioResult(
        error_rate=rate,
        std_err=binomial_se(rate, config.replications),
        replications=config.replications,
        config=config,
        errors=errors,
        design_seed=config.design_seed.stream_seed,
    )


def table1_config(n: int, column: int, replications: int = 10_000,
                  master_seed: int = DEFAULT_MASTER_SEED) -> ScenarioConfig:
    return ScenarioConfig(
        n=n,
        p=n,
        hyp=table1_hypothesis(column),
        replications=replications,
        master_seed=master_seed,
        scenario_id=f"table1/n={n}/col={column}",
    )


def run_table1(rows: Iterable[int] = TABLE1_N, columns: Iterable[int] = range(1, 6),
               replications: int = 10_000, master_seed: int = DEFAULT_MASTER_SEED,
               threads: int | None = None) -> list[ScenarioResult]:
    columns = list(columns)
    return [
        run_scenario(table1_config(n, col, replications, master_seed), threads=threads)
        for n in rows
        for col in columns
    ]


@dataclass(frozen=True)
class RepetitionStudyResult:
    error_rates: np.ndarray
    designs: int
    inner_replications: int
    design_seeds: tuple[int, ...] = field(repr=False)


def repetition_configs(config: ScenarioConfig, designs: int) -> list[ScenarioConfig]:
    return [replace(config, scenario_id=f"{config.scenario_id}#{k}") for k in range(designs)]


def run_repetition_study(config: ScenarioConfig, designs: int,
                         threads: int | None = None) -> RepetitionStudyResult:
    """Redraw the design ``designs`` times and collect each conditional error."""
    if designs < 1:
        raise ValueError(f"designs must be >= 1, got {designs}")
    configs = repetition_configs(config, designs)
    results = _run_tasks(lambda c: run_scenario(c, threads=1), configs, threads)
    return RepetitionStudyResult(
        error_rates=np.array([r.error_rate for r in results]),
        designs=designs,
        inner_replications=config.replications,
        design_seeds=tuple(r.design_seed for r in results),
    )


# --------------------------------------------------------------------------
# Mixture risk of y-only rules under the i.i.d.-means prior


@dataclass(frozen=True)
class MixtureRisk:
    error_rate: float
    std_err: float
    replications: int
    errors: int


def run_iid_prior_risk(rule: Callable[[np.ndarray], int], hyp: TwoPointHypothesis, n: int,
                       replications: int, master_seed: int = DEFAULT_MASTER_SEED,
                       scenario_id: str = "iid-prior") -> MixtureRisk:
    """Mixture error of a rule that sees only y, with mu_i i.i.d. N(0, eta_J^2).

    Half of the replications use hypothesis 0, half hypothesis 1.
    """
    if replications < 2 or replications % 2:
        raise ValueError("replications must be a positive even number")
    half = replications // 2
    errors = 0
    for r in range(replications):
        j = 0 if r < half else 1
        eta2, sigma2 = (hyp.eta0_2, hyp.sigma0_2) if j == 0 else (hyp.eta1_2, hyp.sigma1_2)
        rng = SeedSpec(master_seed, scenario_id, r).generator()
        mu = math.sqrt(eta2) * rng.standard_normal(n)
        y = mu + math.sqrt(sigma2) * rng.standard_normal(n)
        errors += int(rule(y) != j)
    rate = errors / replications
    return MixtureRisk(rate, binomial_se(rate, replications), replications, errors)


# --------------------------------------------------------------------------
# Unconditional mean and variance of the estimator


@dataclass(frozen=True)
class VarianceReport:
    n: int
    p: int
    sigma2: float
    beta_norm2: float
    replications: int
    mean: float
    mean_se: float
    variance: float
    formula: float
    relative_gap: float
    mean_ok: bool
    variance_checked: bool
    variance_ok: bool

    @property
    def passed(self) -> bool:
        return self.mean_ok and (self.variance_ok or not self.variance_checked)


def _fresh_design_chunk(n, p, sigma2, beta_norm2, master_seed, scenario_id, start, stop):
    out = np.empty(stop - start)
    for i, r in enumerate(range(start, stop)):
        rng = SeedSpec(master_seed, scenario_id, r).generator()
        x = rng.standard_normal((n, p))
        beta = sample_beta_fixed_norm(p, beta_norm2, rng)
        y = x @ beta + math.sqrt(sigma2) * rng.standard_normal(n)
        xty = x.T @ y
        out[i] = dicker_from_moments(y @ y, xty @ xty, n, p)
    return out


def dicker_fresh_design_draws(n: int, p: int, sigma2: float, beta_norm2: float,
                              replications: int, master_seed: int = DEFAULT_MASTER_SEED,
                              threads: int | None = None) -> np.ndarray:
    """Estimates over replications that each redraw (X, beta, eps).

    beta is uniform on the sphere of squared radius ``beta_norm2``.
    """
    scenario_id = f"fresh-design/n={n}/p={p}/sigma2={sigma2!r}/beta2={beta_norm2!r}"
    parts = _run_tasks(
        lambda span: _fresh_design_chunk(n, p, sigma2, beta_norm2, master_seed, scenario_id, *span),
        _chunks(replications, 64),
        threads,
    )
    return np.concatenate(parts)


def run_variance_check(n: int, p: int, sigma2: float, beta_norm2: float,
                       replications: int = 20_000, seed: int = DEFAULT_MASTER_SEED,
                       threads: int | None = None, tolerance: float = 0.10) -> VarianceReport:
    """Compare the Monte Carlo mean/variance with sigma2 and the variance formula.

    The mean must lie within 3 standard errors of sigma2. The variance gap is
    only enforced for n >= 400, where the O(1/n) correction is small.
    """
    if n < 1 or p < 1:
        raise ValueError(f"invalid sizes n={n}, p={p}")
    if replications < 1000:
        raise ValueError("variance check needs at least 1000 replications")
    est = dicker_fresh_design_draws(n, p, sigma2, beta_norm2, replications, seed, threads)
    mean = float(est.mean())
    var = float(est.var(ddof=1))
    mean_se = math.sqrt(var / replications)
    formula = dicker_variance_formula(n, p, sigma2, beta_norm2)
    gap = var / formula - 1.0
    return VarianceReport(
        n=n, p=p, sigma2=sigma2, beta_norm2=beta_norm2, replications=replications,
        mean=mean, mean_se=mean_se, variance=var, formula=formula, relative_gap=gap,
        mean_ok=abs(mean - sigma2) <= 3 * mean_se,
        variance_checked=n >= 400,
        variance_ok=abs(gap) <= tolerance,
    )


# --------------------------------------------------------------------------
# Conditional deviation probabilities against the g / (xi^2 sqrt n) shape


@dataclass(frozen=True)
class BoundRow:
    n: int
    p: int
    exceedance: float
    std_err: float
    g_mean: float
    shape: float
    ratio: float
    ratio_se: float


@dataclass(frozen=True)
class BoundReport:
    rows: tuple[BoundRow, ...]
    c: float
    xi: float
    sigma2: float
    beta_norm2: float
    replications: int
    fitted_C: float
    slope: float
    slope_se: float
    C_max: float

    @property
    def strictly_decreasing(self) -> bool:
        probs = [r.exceedance for r in self.rows]
        return all(a > b for a, b in zip(probs, probs[1:]))

    @property
    def bounded(self) -> bool:
        return self.fitted_C <= self.C_max

    @property
    def no_growth(self) -> bool:
        return self.slope <= 2 * self.slope_se

    @property
    def passed(self) -> bool:
        return self.bounded and self.no_growth


def _bound_chunk(x, sigma2, beta_norm2, master_seed, scenario_id, start, stop):
    n, p = x.shape
    k = stop - start
    betas = np.empty((p, k))
    noise = np.empty((n, k))
    for col, r in enumerate(range(start, stop)):
        rng = SeedSpec(master_seed, scenario_id, r).generator()
        betas[:, col] = sample_beta_fixed_norm(p, beta_norm2, rng)
        noise[:, col] = math.sqrt(sigma2) * rng.standard_normal(n)
    mu = x @ betas
    y = mu + noise
    est = dicker_from_moments(_column_norm2(y), _column_norm2(x.T @ y), n, p)
    return est, _column_norm2(mu)


def run_bound_scaling_check(c: float, n_grid: Sequence[int], xi: float, sigma2: float = 1.0,
                            beta_norm2: float = 1.0, replications: int = 4000,
                            seed: int = DEFAULT_MASTER_SEED, threads: int | None = None,
                            C_max: float = 10.0) -> BoundReport:
    """Fixed-design probability that |estimate - sigma2| >= xi, for each n.

    For every n one standardized design with p = round(c n) is drawn; beta is
    redrawn on the sphere of squared radius ``beta_norm2``. The ratio of the
    probability to g / (xi^2 sqrt n) estimates the smallest admissible
    constant; its trend in log n is fitted by least squares.
    """
    n_grid = list(n_grid)
    if not n_grid or any(b <= a for a, b in zip(n_grid, n_grid[1:])) or n_grid[0] < 1:
        raise ValueError(f"n_grid must be a non-empty increasing list of positive sizes, got {n_grid}")
    if xi <= 0 or replications < 1:
        raise ValueError("need xi > 0 and replications >= 1")
    rows = []
    for n in n_grid:
        p = max(2, round(c * n))
        scenario_id = f"bound-check/c={c!r}/n={n}"
        x = standardize_array(sample_design(n, p, SeedSpec(seed, scenario_id).child("design")).entries)
        parts = _run_tasks(
            lambda span: _bound_chunk(x, sigma2, beta_norm2, seed, scenario_id, *span),
            _chunks(replications),
            threads,
        )
        est = np.concatenate([e for e, _ in parts])
        mu_norm2 = np.concatenate([m for _, m in parts])
        hits = int(np.count_nonzero(np.abs(est - sigma2) >= xi))
        prob = hits / replications
        se = binomial_se(prob, replications)
        g_mean = float(np.mean([theorem_bound_g(BoundInputs(c, n, float(m), sigma2, xi)) for m in mu_norm2]))
        shape = g_mean / (xi**2 * math.sqrt(n))
        rows.append(BoundRow(n, p, prob, se, g_mean, shape, prob / shape, se / shape))

    ratios = np.array([r.ratio for r in rows])
    if len(rows) > 1:
        t = np.log([r.n for r in rows])
        w = (t - t.mean()) / np.sum((t - t.mean()) ** 2)
        slope = float(w @ ratios)
        slope_se = float(math.sqrt(np.sum(w**2 * np.array([r.ratio_se for r in rows]) ** 2)))
    else:
        slope, slope_se = 0.0, 0.0
    return BoundReport(
        rows=tuple(rows), c=c, xi=xi, sigma2=sigma2, beta_norm2=beta_norm2,
        replications=replications, fitted_C=float(ratios.max()),
        slope=slope, slope_se=slope_se, C_max=C_max,
    )


# --------------------------------------------------------------------------
# Gaussian moment identities behind the concentration of |X beta|^2 / n


@dataclass(frozen=True)
class MomentReport:
    p: int
    beta_norm2: float
    draws: int
    fourth_moment: float
    fourth_se: float
    fourth_target: float
    n: int
    designs: int
    energy_variance: float
    energy_variance_se: float
    energy_variance_target: float

    @property
    def fourth_z(self) -> float:
        return _zscore(self.fourth_moment, self.fourth_target, self.fourth_se)

    @property
    def excess_fourth(self) -> float:
        """E(x'beta)^4 - |beta|^4, which should equal 2 |beta|^4."""
        return self.fourth_moment - self.beta_norm2**2

    @property
    def energy_z(self) -> float:
        return _zscore(self.energy_variance, self.energy_variance_target, self.energy_variance_se)

    @property
    def fourth_ok(self) -> bool:
        return abs(self.fourth_z) <= 4

    @property
    def energy_ok(self) -> bool:
        return abs(self.energy_z) <= 5

    @property
    def passed(self) -> bool:
        return self.fourth_ok and self.energy_ok


def _zscore(estimate: float, target: float, se: float) -> float:
    if se == 0:
        return 0.0 if estimate == target else math.inf
    return (estimate - target) / se


def _fourth_chunk(beta, master_seed, start, stop):
    rng = SeedSpec(master_seed, "moment-check/fourth", start).generator()
    z = rng.standard_normal((stop - start, beta.size)) @ beta
    return (z * z) ** 2


def _energy_chunk(beta, n, master_seed, start, stop):
    rng = SeedSpec(master_seed, "moment-check/energy", start).generator()
    x = rng.standard_normal((stop - start, n, beta.size))
    mu = x @ beta
    return np.mean(mu * mu, axis=1)


def run_moment_identity_check(beta, draws: int = 1_000_000, seed: int = DEFAULT_MASTER_SEED,
                              n: int = 50, designs: int = 10_000,
                              threads: int | None = None) -> MomentReport:
    """Monte Carlo check of E(x'beta)^4 = 3|beta|^4 and var(|X beta|^2/n) = 2|beta|^4/n.

    x is N(0, I_p) and X has n i.i.d. such rows; both unstandardized.
    """
    beta = np.asarray(beta, dtype=np.float64).ravel()
    if beta.size < 1:
        raise ValueError("beta must be non-empty")
    if draws < 100_000:
        raise ValueError(f"need at least 1e5 draws, got {draws}")
    if designs < 2 or n < 1:
        raise ValueError("need designs >= 2 and n >= 1")
    b2 = float(beta @ beta)

    fourth = np.concatenate(_run_tasks(
        lambda span: _fourth_chunk(beta, seed, *span), _chunks(draws, 1 << 16), threads))
    energy = np.concatenate(_run_tasks(
        lambda span: _energy_chunk(beta, n, seed, *span), _chunks(designs, 512), threads))

    v = float(energy.var(ddof=1))
    m4 = float(np.mean((energy - energy.mean()) ** 4))
    return MomentReport(
        p=beta.size, beta_norm2=b2, draws=draws,
        fourth_moment=float(fourth.mean()),
        fourth_se=float(fourth.std(ddof=1) / math.sqrt(draws)),
        fourth_target=3 * b2**2,
        n=n, designs=designs,
        energy_variance=v,
        energy_variance_se=math.sqrt(max(m4 - v * v, 0.0) / designs),
        energy_variance_target=2 * b2**2 / n,
    )
