"""Estimating the effects of deploying and retraining predictive models.

Simulated structural causal models with exact oracles, a repeated-regression
estimator for transporting conditional expectations across deployment
domains, and the effect, selection and pivot-diagnostic tools built on it.
"""

from .effects import (
    baseline_predictor,
    deployment_effect_post,
    deployment_effect_pre,
    naive_retrain,
    performative_bias,
    retraining_effect,
)
from .estimator import (
    BootstrapConfig,
    EffectReport,
    OverlapError,
    OverlapReport,
    PivotSpec,
    bootstrap,
    check_overlap,
    estimate_mean,
    repeated_regression,
)
from .experiment import EpochSpec, ExperimentConfig, run_epochs
from .pivot import pivot_diagnostic
from .regress import FittedModel, RegressionConfig, fit
from .scenarios import get_scenario, scenario_library
from .scm import Dataset, DomainSetting, Scenario, sample, validate
from .selection import corrected_estimate, observe

__version__ = "0.1.0"
