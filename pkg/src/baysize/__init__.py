"""Bayesian sample size and power for phase I dose-finding trials.

Trials follow the mTPI-2 design. The evidence that some dose is the MTD is a
Bayes factor between two mixtures of truncated-beta product priors, and the
sample size is the smallest ``n`` whose calibrated test reaches a target power.
"""

from .bayes_factor import (
    BayesFactorBatch,
    BayesFactorResult,
    HypothesisPrior,
    bayes_factor,
    log_marginal_dose,
    log_marginal_submodel,
)
from .config import ConfigError, RunConfig, load_config, parse_config
from .design import (
    DesignConfig,
    DoseDecision,
    EquivalenceInterval,
    TrialOutcome,
    decision_table,
    mtpi2_decision,
    safety_stop,
    simulate_trial,
    simulate_trials,
    upm_intervals,
)
from .priors import (
    FittingPriorSpec,
    Hypothesis,
    Region,
    Submodel,
    TruncatedBeta,
    fitting_prior_submodel,
    mode_table,
    mode_vector,
    submodels,
)
from .scenarios import H0SamplingPrior, ScenarioSpec, default_scenarios, draw_h0, scenario_p1
from .search import (
    SearchConfig,
    SearchResult,
    bisect_sample_size,
    calibrate_cutoff,
    cutoff_from_sample,
    estimate_power,
    find_sample_size,
    power_table,
)

__version__ = "0.1.0"

import types as _types

__all__ = sorted(
    name for name, obj in globals().items()
    if not name.startswith("_") and not isinstance(obj, _types.ModuleType)
)
