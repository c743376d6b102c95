"""Deployment and retraining effects, the baseline predictor and performative bias.

Sign convention: lower ``y`` is better, so a helpful deployment has a
negative effect.
"""

from __future__ import annotations

import csv
from typing import Sequence

import numpy as np

from .estimator import (
    BootstrapConfig,
    EffectReport,
    PivotSpec,
    _data,
    _guard,
    fit_inner,
    direct_regression,
    repeated_regression,
    two_sample_report,
)
from .regress import FittedModel, RegressionConfig
from .scm import Dataset


class DomainMismatchError(ValueError):
    pass


def _require(ds: Dataset, d: int, what: str, task: str) -> None:
    if ds.setting.d != d:
        raise DomainMismatchError(f"{task}: {what} must come from d={d}, got d={ds.setting.d}")


def _shifted_mean(source, target, pivot, cfg, boot, allow_extrapolation, sign, label) -> EffectReport:
    # sign=+1: mean over target minus source mean; sign=-1: the reverse
    overlap = _guard(source, target, pivot, allow_extrapolation, 10)

    def stat(s, t, warm):
        inner = fit_inner(s, pivot, cfg, warm)
        transported = float(np.mean(inner.predict(_data(t, pivot.inputs))))
        return sign * (transported - s.mean_y()), inner

    return two_sample_report(source, target, stat, boot, overlap, label)


def deployment_effect_pre(
    source_d0: Dataset,
    target_pivot: Dataset,
    pivot: PivotSpec,
    cfg: RegressionConfig = RegressionConfig(),
    boot: BootstrapConfig | None = BootstrapConfig(),
    allow_extrapolation: bool = False,
) -> EffectReport:
    """tau(theta) before deployment: transport the off-domain labels to the deployed pivot sample."""
    _require(source_d0, 0, "source", "deployment_effect_pre")
    _require(target_pivot, 1, "target", "deployment_effect_pre")
    return _shifted_mean(source_d0, target_pivot, pivot, cfg, boot, allow_extrapolation, 1, "tau_pre")


def deployment_effect_post(
    source_d1: Dataset,
    target_pivot: Dataset,
    pivot: PivotSpec,
    cfg: RegressionConfig = RegressionConfig(),
    boot: BootstrapConfig | None = BootstrapConfig(),
    allow_extrapolation: bool = False,
) -> EffectReport:
    """tau(theta) after deployment: deployed mean minus the transported off-domain mean."""
    _require(source_d1, 1, "source", "deployment_effect_post")
    _require(target_pivot, 0, "target", "deployment_effect_post")
    return _shifted_mean(source_d1, target_pivot, pivot, cfg, boot, allow_extrapolation, -1, "tau_post")


def retraining_effect(
    source: Dataset,
    target_pivot: Dataset,
    pivot: PivotSpec,
    cfg: RegressionConfig = RegressionConfig(),
    boot: BootstrapConfig | None = BootstrapConfig(),
    allow_extrapolation: bool = False,
) -> EffectReport:
    """rho(theta_next, theta_now): transported mean under the new parameters minus the current mean."""
    _require(source, 1, "source", "retraining_effect")
    _require(target_pivot, 1, "target", "retraining_effect")
    return _shifted_mean(source, target_pivot, pivot, cfg, boot, allow_extrapolation, 1, "rho")


def baseline_predictor(
    source: Dataset,
    target_pivot: Dataset,
    pivot: PivotSpec,
    cfg: RegressionConfig = RegressionConfig(),
    allow_extrapolation: bool = False,
) -> FittedModel:
    """Model of ``E[Y | X, do(D=0)]`` learned from deployed-domain labels."""
    _require(source, 1, "source", "baseline_predictor")
    _require(target_pivot, 0, "target", "baseline_predictor")
    outer, _ = repeated_regression(source, target_pivot, pivot, cfg, allow_extrapolation)
    return outer


def performative_bias(deployed_model: FittedModel, baseline_model: FittedModel, grid) -> list[tuple[float, float]]:
    """Pointwise ``deployed - baseline`` on ``grid``."""
    if deployed_model.feature_map.inputs != baseline_model.feature_map.inputs:
        raise ValueError("models must share their x inputs")
    grid = np.asarray(grid, dtype=float)
    name = deployed_model.feature_map.inputs[0]
    bias = deployed_model.predict({name: grid}) - baseline_model.predict({name: grid})
    return [(float(x), float(b)) for x, b in zip(grid, bias)]


def naive_retrain(source: Dataset, cfg: RegressionConfig = RegressionConfig()) -> FittedModel:
    """Direct regression of y on x that ignores which domain produced the data."""
    return direct_regression(source, cfg)


def write_curve(path, columns: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])
