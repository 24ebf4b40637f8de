"""Estimators, stopping rules and risk simulations for time-robust
estimation rates, with a finite-time LIL test supermartingale."""

from .adversaries import (
    CappedStop,
    FixedStop,
    GapStop,
    LilStop,
    StoppingRule,
    capped_stop,
    fixed_stop,
    gap_stop,
    lil_stop,
    parse_rule,
)
from .engine import NumericalError, RunningStats
from .estimators import (
    MLE,
    Constant,
    Dyadic,
    DyadicWeight,
    Estimator,
    FunctionEstimator,
    LilOffset,
    Offset,
    Oracle,
    PosteriorMean,
    dyadic,
    get_estimator,
    mle,
    pi_weight,
    posterior_mean,
)
from .model import (
    RATES,
    Box,
    FamilySpec,
    RateFn,
    bernoulli,
    envelope_check,
    gaussian,
    get_family,
    get_rate,
    product_gaussian,
    rate_f,
    sigma_of,
)
from .risk import (
    RiskEstimate,
    bayes_risk,
    mu_sweep,
    standard_risk,
    strong_risk,
    strong_risk_curve,
    trigger_report,
    weak_risk,
)
from .selection import (
    AIC,
    BIC,
    PostSelectionEstimator,
    SelectionOutcome,
    Selector,
    aic_select,
    bic_select,
    post_selection_risk,
)
from .supermartingale import (
    MixtureSpec,
    SupermartingaleState,
    evalue,
    lil_constants,
    lil_prior,
    pvalue,
    scan_mixtures,
    strong_sup_ratio,
    supermartingale_check,
    z_update,
)
from .trajectory import Trajectory

__all__ = [name for name in dir() if not name.startswith("_")]
