"""Sample selection and selective labelling.

A unit enters the data only when ``s_sample == 1`` and its outcome is
recorded only when ``s_label == 1``. The corrected estimator fits the inner
regression on the selected, labelled rows and transports it to an
unselected target through a pivot that includes every variable the
selection indicator acts on.
"""

from __future__ import annotations

import warnings

from .estimator import BootstrapConfig, EffectReport, PivotSpec, estimate_mean, repeated_regression
from .regress import FittedModel, RegressionConfig
from .scm import Dataset


class SelectionWarning(UserWarning):
    pass


def observe(dataset: Dataset) -> Dataset:
    """Drop unselected rows. Unlabelled rows stay, with their labels masked."""
    return dataset.observed()


def _check_pivot(source: Dataset, target: Dataset, pivot: PivotSpec) -> None:
    relevant = set(source.selection_relevant) | set(target.selection_relevant)
    missing = sorted(relevant - set(pivot.inputs) - {"y"})
    if missing:
        warnings.warn(f"pivot excludes selection-relevant variable(s): {', '.join(missing)}",
                      SelectionWarning, stacklevel=3)


def corrected_estimate(
    source_observed: Dataset,
    target_pivot: Dataset,
    pivot: PivotSpec,
    cfg: RegressionConfig = RegressionConfig(),
    allow_extrapolation: bool = False,
) -> FittedModel:
    """Model of ``E[Y | X]`` in the unselected target domain."""
    _check_pivot(source_observed, target_pivot, pivot)
    outer, _ = repeated_regression(source_observed.labeled(), target_pivot, pivot, cfg, allow_extrapolation)
    return outer


def corrected_mean(
    source_observed: Dataset,
    target_pivot: Dataset,
    pivot: PivotSpec,
    cfg: RegressionConfig = RegressionConfig(),
    boot: BootstrapConfig | None = BootstrapConfig(),
    allow_extrapolation: bool = False,
) -> EffectReport:
    """``E[Y]`` in the unselected target domain."""
    _check_pivot(source_observed, target_pivot, pivot)
    return estimate_mean(source_observed.labeled(), target_pivot, pivot, cfg, boot, allow_extrapolation)
