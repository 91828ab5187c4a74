"""Residual-variance estimation when p >= n: Dicker's moment estimator,
the two-point Bayes test, and Monte Carlo experiments around them."""

__version__ = "0.1.0"

from hdvar.bayes import (  # noqa: E402
    DegenerateHypothesisError,
    PosteriorReport,
    TwoPointHypothesis,
    bayes_rule,
    bayes_threshold,
    dicker_rule,
    marginal_loglik,
    posterior_log_odds,
    threshold_rule_factory,
)
from hdvar.estimators import (  # noqa: E402
    BoundInputs,
    DickerEstimate,
    conditional_bound_rhs,
    dicker_estimate,
    dicker_variance_formula,
    theorem_bound_g,
)
from hdvar.model import (  # noqa: E402
    ConditionalMeans,
    Dataset,
    DesignMatrix,
    GaussianLinearModel,
    conditional_means,
    sample_beta_spherical,
    sample_design,
    sample_response,
    standardize_rows,
)
from hdvar.seeding import DEFAULT_MASTER_SEED, SeedSpec  # noqa: E402
