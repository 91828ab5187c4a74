"""Dicker's moment estimator of the residual variance and related bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from hdvar.model import Dataset


@dataclass(frozen=True)
class DickerEstimate:
    """Estimate of sigma^2 together with the two moments it is built from.

    The value is reported as-is and may be negative.
    """

    value: float
    y_norm2: float
    xty_norm2: float
    n: int
    p: int

    def __float__(self) -> float:
        return self.value


def dicker_coefficients(n: int, p: int) -> tuple[float, float]:
    """Weights (a, b) such that the estimate is a*||Y||^2 - b*||X'Y||^2."""
    denom = n * (n + 1)
    return (p + n + 1) / denom, 1.0 / denom


def dicker_from_moments(y_norm2, xty_norm2, n: int, p: int):
    """Vectorised form of the estimator on precomputed moments."""
    a, b = dicker_coefficients(n, p)
    return a * np.asarray(y_norm2) - b * np.asarray(xty_norm2)


def dicker_estimate(data: Dataset) -> DickerEstimate:
    x, y = data.design.entries, data.response
    n, p = x.shape
    if n < 1:
        raise ValueError("need at least one observation")
    xty = x.T @ y
    y_norm2 = float(y @ y)
    xty_norm2 = float(xty @ xty)
    value = float(dicker_from_moments(y_norm2, xty_norm2, n, p))
    return DickerEstimate(value, y_norm2, xty_norm2, n, p)


def dicker_variance_formula(n: int, p: int, sigma2: float, beta_norm2: float) -> float:
    """Leading term of the unconditional variance of the estimator.

    (2/n) * {(p/n)(sigma2 + |beta|^2)^2 + sigma2^2 + |beta|^4}; the
    multiplicative 1 + O(1/n) correction is not modelled.
    """
    if n < 1 or p < 1:
        raise ValueError(f"need n >= 1 and p >= 1, got n={n}, p={p}")
    if sigma2 <= 0 or beta_norm2 < 0:
        raise ValueError("need sigma2 > 0 and beta_norm2 >= 0")
    total = sigma2 + beta_norm2
    return 2.0 / n * (p / n * total**2 + sigma2**2 + beta_norm2**2)


@dataclass(frozen=True)
class BoundInputs:
    c: float
    n: int
    mu_norm2: float
    sigma2: float
    xi: float

    def __post_init__(self):
        if self.c < 1:
            raise ValueError(f"c must be >= 1, got {self.c}")
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if self.mu_norm2 < 0:
            raise ValueError("mu_norm2 must be non-negative")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if self.xi <= 0:
            raise ValueError(f"xi must be positive, got {self.xi}")


def theorem_bound_g(inputs: BoundInputs) -> float:
    """1 + 2(c+1){(|mu|^2/n)^2 + sigma^4} + 4 sigma^2 |mu|^2 / n + 2 sigma^4."""
    signal = inputs.mu_norm2 / inputs.n
    s4 = inputs.sigma2**2
    return 1.0 + 2.0 * (inputs.c + 1.0) * (signal**2 + s4) + 4.0 * inputs.sigma2 * signal + 2.0 * s4


def conditional_bound_rhs(inputs: BoundInputs, C: float = 1.0) -> float:
    """C * g / (xi^2 sqrt(n)); C is caller-supplied since only its existence is known."""
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    return C * theorem_bound_g(inputs) / (inputs.xi**2 * math.sqrt(inputs.n))
