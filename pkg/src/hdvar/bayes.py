"""The two-point problem sigma^2 = sigma0^2 versus sigma^2 = sigma1^2.

Under hypothesis J the conditional means are i.i.d. N(0, eta_J^2) and the
noise variance is sigma_J^2, so each y_i is marginally N(0, eta_J^2 + sigma_J^2).
J itself is Bernoulli(1/2). When the two totals coincide the observations
carry no information about J.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from hdvar.estimators import dicker_estimate
from hdvar.model import Dataset


class DegenerateHypothesisError(ValueError):
    """Raised when both hypotheses induce the same law for y."""


@dataclass(frozen=True)
class TwoPointHypothesis:
    eta0_2: float
    sigma0_2: float
    eta1_2: float
    sigma1_2: float

    def __post_init__(self):
        for name in ("eta0_2", "eta1_2"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("sigma0_2", "sigma1_2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def total0(self) -> float:
        return self.eta0_2 + self.sigma0_2

    @property
    def total1(self) -> float:
        return self.eta1_2 + self.sigma1_2

    @property
    def ordered(self) -> bool:
        return self.sigma1_2 > self.sigma0_2

    @property
    def equal_totals(self) -> bool:
        return math.isclose(self.total0, self.total1, rel_tol=1e-12, abs_tol=0.0)

    def swapped(self) -> "TwoPointHypothesis":
        return TwoPointHypothesis(self.eta1_2, self.sigma1_2, self.eta0_2, self.sigma0_2)


@dataclass(frozen=True)
class PosteriorReport:
    log_odds: float
    posterior0: float


def _as_y(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size == 0:
        raise ValueError("y must contain at least one observation")
    return y


def marginal_loglik(y, eta2: float, sigma2: float) -> float:
    """Log density of N(0, (eta2 + sigma2) I) at y."""
    total = eta2 + sigma2
    if not total > 0:
        raise ValueError(f"total variance must be positive, got {total}")
    y = _as_y(y)
    n = y.size
    return -0.5 * n * math.log(2 * math.pi) - 0.5 * n * math.log(total) - float(y @ y) / (2 * total)


def posterior_log_odds(y, hyp: TwoPointHypothesis) -> PosteriorReport:
    """log pr(J=0 | y) - log pr(J=1 | y) under equal prior weights."""
    y = _as_y(y)
    t0, t1 = hyp.total0, hyp.total1
    if not (t0 > 0 and t1 > 0):
        raise ValueError("total variances must be positive")
    if hyp.equal_totals:
        # totals equal up to rounding: the y-laws coincide
        return PosteriorReport(0.0, 0.5)
    log_odds = float(log_odds_from_sum_squares(float(y @ y), y.size, hyp))
    return PosteriorReport(log_odds, float(expit(log_odds)))


def log_odds_from_sum_squares(sum_y2, n: int, hyp: TwoPointHypothesis):
    """Posterior log-odds as a function of the sufficient statistic sum(y^2).

    Accepts arrays of sums; no degeneracy handling.
    """
    t0, t1 = hyp.total0, hyp.total1
    return 0.5 * n * math.log(t1 / t0) + 0.5 * np.asarray(sum_y2) * (1.0 / t1 - 1.0 / t0)


def bayes_threshold(hyp: TwoPointHypothesis) -> float | None:
    """Cut-point on mean(y^2) where the posterior odds equal one.

    Returns ``None`` when the totals coincide. Hypothesis 0 is favoured on the
    side of the cut-point nearer its own total: below it when total0 < total1,
    above it otherwise.
    """
    t0, t1 = hyp.total0, hyp.total1
    if not (t0 > 0 and t1 > 0):
        raise ValueError("total variances must be positive")
    if hyp.equal_totals:
        return None
    return math.log(t0 / t1) / (1.0 / t1 - 1.0 / t0)


def bayes_rule(y, hyp: TwoPointHypothesis, on_degenerate: str = "raise") -> int:
    """Decide 0 iff the log posterior odds are >= 0.

    With equal totals every rule is Bayes; ``on_degenerate="zero"`` picks 0
    instead of raising :class:`DegenerateHypothesisError`.
    """
    if hyp.equal_totals:
        if on_degenerate == "zero":
            return 0
        if on_degenerate != "raise":
            raise ValueError(f"unknown degenerate policy {on_degenerate!r}")
        raise DegenerateHypothesisError("equal total variances: the posterior equals the prior")
    return 0 if posterior_log_odds(y, hyp).log_odds >= 0 else 1


def _midpoint(sigma0_2: float, sigma1_2: float) -> float:
    if not sigma1_2 > sigma0_2 > 0:
        raise ValueError(f"need sigma1_2 > sigma0_2 > 0, got {sigma0_2}, {sigma1_2}")
    return 0.5 * (sigma0_2 + sigma1_2)


def threshold_rule_factory(
    estimator: Callable[[Dataset], float], sigma0_2: float, sigma1_2: float
) -> Callable[[Dataset], int]:
    """Turn a sigma^2 estimator into a midpoint decision rule (ties go to 0)."""
    mid = _midpoint(sigma0_2, sigma1_2)

    def rule(data: Dataset) -> int:
        return 1 if float(estimator(data)) > mid else 0

    return rule


def dicker_rule(data: Dataset, sigma0_2: float, sigma1_2: float) -> int:
    return threshold_rule_factory(dicker_estimate, sigma0_2, sigma1_2)(data)
