"""Random objects of the Gaussian random-design linear model.

    x ~ N(0, I_p),   y | x ~ N(beta' x, sigma2)

Every sampler is a pure function of its dimensions, parameters and a
:class:`~hdvar.seeding.SeedSpec`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hdvar.seeding import SeedSpec


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, order="C", copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Dense row-major n x p design. Immutable once built."""

    entries: np.ndarray
    standardized: bool = False

    def __post_init__(self):
        entries = _frozen(self.entries)
        if entries.ndim != 2:
            raise ValueError(f"design must be 2-dimensional, got shape {entries.shape}")
        n, p = entries.shape
        if n < 1 or p < 1:
            raise ValueError(f"design needs n >= 1 and p >= 1, got {n}x{p}")
        if not np.all(np.isfinite(entries)):
            raise ValueError("design entries must be finite")
        object.__setattr__(self, "entries", entries)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def p(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True, eq=False)
class GaussianLinearModel:
    beta: np.ndarray
    sigma2: float

    def __post_init__(self):
        beta = _frozen(self.beta)
        if beta.ndim != 1:
            raise ValueError("beta must be a vector")
        if not np.all(np.isfinite(beta)):
            raise ValueError("beta entries must be finite")
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        object.__setattr__(self, "beta", beta)

    @property
    def beta_norm2(self) -> float:
        return float(self.beta @ self.beta)


@dataclass(frozen=True, eq=False)
class ConditionalMeans:
    mu: np.ndarray

    @property
    def norm2(self) -> float:
        return float(self.mu @ self.mu)


@dataclass(frozen=True, eq=False)
class Dataset:
    design: DesignMatrix
    response: np.ndarray = field(repr=False)

    def __post_init__(self):
        y = _frozen(self.response)
        if y.shape != (self.design.n,):
            raise ValueError(f"response has shape {y.shape}, expected ({self.design.n},)")
        object.__setattr__(self, "response", y)

    @property
    def n(self) -> int:
        return self.design.n

    @property
    def p(self) -> int:
        return self.design.p


def sample_design(n: int, p: int, seed: SeedSpec) -> DesignMatrix:
    """n x p matrix of i.i.d. N(0, 1) entries, unstandardized."""
    if n < 1 or p < 1:
        raise ValueError(f"need n >= 1 and p >= 1, got n={n}, p={p}")
    return DesignMatrix(seed.generator().standard_normal((n, p)))


def standardize_array(x: np.ndarray) -> np.ndarray:
    """Center each row and rescale it so its sum of squares equals p."""
    x = np.asarray(x, dtype=np.float64)
    p = x.shape[1]
    if p < 2:
        raise ValueError("standardization needs p >= 2")
    centered = x - x.mean(axis=1, keepdims=True)
    ss = np.einsum("ij,ij->i", centered, centered)
    # residuals of a constant row are rounding noise relative to its magnitude
    floor = (np.finfo(np.float64).eps * p * np.abs(x).max(axis=1)) ** 2 * p
    bad = np.flatnonzero(ss <= floor)
    if bad.size:
        raise ValueError(f"row {bad[0]} is constant; standardization is undefined")
    return centered * np.sqrt(p / ss)[:, None]


def standardize_rows(design: DesignMatrix) -> DesignMatrix:
    return DesignMatrix(standardize_array(design.entries), standardized=True)


def sample_beta_spherical(p: int, eta2: float, seed: SeedSpec) -> np.ndarray:
    """Coefficients drawn i.i.d. N(0, eta2 / p).

    With standardized rows (sum of squares p) each conditional mean x_i' beta
    is then exactly N(0, eta2).
    """
    if p < 1:
        raise ValueError(f"p must be positive, got {p}")
    if eta2 < 0:
        raise ValueError(f"eta2 must be non-negative, got {eta2}")
    return np.sqrt(eta2 / p) * seed.generator().standard_normal(p)


def sample_beta_fixed_norm(p: int, beta_norm2: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform direction on the sphere of squared radius ``beta_norm2``."""
    if beta_norm2 == 0:
        return np.zeros(p)
    z = rng.standard_normal(p)
    return z * np.sqrt(beta_norm2 / (z @ z))


def _check_beta(design: DesignMatrix, beta: np.ndarray) -> np.ndarray:
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (design.p,):
        raise ValueError(f"beta has shape {beta.shape}, design has p={design.p}")
    return beta


def conditional_means(design: DesignMatrix, beta) -> ConditionalMeans:
    return ConditionalMeans(design.entries @ _check_beta(design, beta))


def sample_response(design: DesignMatrix, model: GaussianLinearModel, seed: SeedSpec) -> Dataset:
    """Y = X beta + eps with eps ~ N(0, sigma2 I)."""
    mu = conditional_means(design, model.beta).mu
    eps = np.sqrt(model.sigma2) * seed.generator().standard_normal(design.n)
    return Dataset(design, mu + eps)
