"""Repeated regression: transport ``E[Y | X]`` across domains through a pivot.

An inner model ``E[Y | X, Z]`` is fitted on labelled source rows, evaluated on
the unlabelled target rows as pseudo-labels, and an outer model regresses the
pseudo-labels on ``X``. The target mean is the average pseudo-label.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .regress import FittedModel, RegressionConfig, fit_config
from .scm import Dataset


class OverlapError(ValueError):
    def __init__(self, report: "OverlapReport"):
        self.report = report
        super().__init__(
            f"absolute continuity violated in {len(report.violations)} target strata "
            f"(first: {report.violations[:3]}); pass allow_extrapolation=True to proceed"
        )


class DegenerateWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PivotSpec:
    z_names: tuple[str, ...] = ()
    x_names: tuple[str, ...] = ("x",)

    def __post_init__(self):
        object.__setattr__(self, "z_names", tuple(self.z_names))
        object.__setattr__(self, "x_names", tuple(self.x_names))
        if set(self.z_names) & set(self.x_names):
            raise ValueError("pivot z_names and x_names must be disjoint")

    @property
    def inputs(self) -> tuple[str, ...]:
        return self.x_names + self.z_names

    def check(self, ds: Dataset) -> None:
        for k in self.inputs:
            if k not in ds.columns:
                raise KeyError(f"pivot variable {k!r} missing from dataset")


@dataclass(frozen=True)
class OverlapReport:
    strata_checked: int
    violations: list = field(default_factory=list)
    worst_ratio: float = 1.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"strata_checked": self.strata_checked, "violations": [list(v) for v in self.violations],
                "worst_ratio": self.worst_ratio}


@dataclass(frozen=True)
class BootstrapConfig:
    replicates: int = 200
    level: float = 0.9
    seed: int = 0


@dataclass
class EffectReport:
    estimate: float
    ci_low: float
    ci_high: float
    n_source: int
    n_target: int
    overlap: OverlapReport | None = None
    replicates: int = 0
    dropped: int = 0
    level: float = 0.9
    label: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["overlap"] = self.overlap.to_dict() if self.overlap else None
        return d

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)


def _bins(values: np.ndarray, ref: np.ndarray, q: int) -> np.ndarray:
    edges = np.quantile(ref, np.linspace(0, 1, q + 1))
    return np.searchsorted(edges[1:-1], values, side="right")


def _strata(source: Dataset, target: Dataset, pivot: PivotSpec, q: int):
    s_cols, t_cols = [], []
    for k in pivot.inputs:
        s, t = np.asarray(source[k]), np.asarray(target[k])
        if len(np.unique(np.concatenate([s, t]))) <= 20:
            s_cols.append(s)
            t_cols.append(t)
        else:
            s_cols.append(_bins(s, s, q).astype(float))
            t_cols.append(_bins(t, s, q).astype(float))
    return np.column_stack(s_cols), np.column_stack(t_cols)


def check_overlap(source: Dataset, target: Dataset, pivot: PivotSpec, q: int = 10) -> OverlapReport:
    """Target strata (x-bin, z) with no source mass.

    Continuous variables use ``q`` quantile bins of the source, with the end
    bins open; discrete variables are matched exactly.
    """
    s, t = _strata(source, target, pivot, q)
    s_keys, s_counts = np.unique(s, axis=0, return_counts=True)
    t_keys, t_counts = np.unique(t, axis=0, return_counts=True)
    s_map = {tuple(k): c for k, c in zip(s_keys, s_counts)}
    violations, worst = [], 0.0
    for k, c in zip(t_keys, t_counts):
        key = tuple(float(v) for v in k)
        sc = s_map.get(tuple(k), 0)
        if sc == 0:
            violations.append(key)
        else:
            worst = max(worst, (c / len(t)) / (sc / len(s)))
    return OverlapReport(len(t_keys), violations, float(worst))


def bootstrap(
    estimator: Callable[[np.random.Generator], float],
    replicates: int = 200,
    seed: int = 0,
    level: float = 0.9,
) -> tuple[float, float, int]:
    """Percentile interval from ``replicates`` re-estimates.

    Replicate ``r`` gets its own generator seeded with ``seed + r``. Failing
    replicates are dropped; more than 10% dropped is an error.
    """
    if replicates < 50:
        raise ValueError("bootstrap needs at least 50 replicates")
    values, dropped = [], 0
    for r in range(replicates):
        try:
            values.append(float(estimator(np.random.default_rng(seed + r))))
        except (ValueError, np.linalg.LinAlgError, FloatingPointError):
            dropped += 1
    if dropped > 0.1 * replicates:
        raise RuntimeError(f"{dropped} of {replicates} bootstrap replicates failed")
    alpha = 1.0 - level
    lo, hi = np.quantile(values, [alpha / 2, 1 - alpha / 2])
    return float(lo), float(hi), dropped


def _data(ds: Dataset, names: Sequence[str]) -> dict:
    return {k: ds[k] for k in names}


def fit_inner(source: Dataset, pivot: PivotSpec, cfg: RegressionConfig = RegressionConfig(),
              warm: FittedModel | None = None) -> FittedModel:
    pivot.check(source)
    return fit_config(_data(source, pivot.inputs), source.labels(), pivot.inputs, cfg, warm=warm)


def direct_regression(ds: Dataset, cfg: RegressionConfig = RegressionConfig(), x_names=("x",)) -> FittedModel:
    """Plain regression of y on x (no domain correction)."""
    return fit_config(_data(ds, x_names), ds.labels(), x_names, cfg)


def _guard(source: Dataset, target: Dataset, pivot: PivotSpec, allow_extrapolation: bool, q: int) -> OverlapReport:
    pivot.check(target)
    if not pivot.z_names and source.setting.tag == target.setting.tag:
        warnings.warn("degenerate: reduces to direct regression", DegenerateWarning, stacklevel=3)
    report = check_overlap(source, target, pivot, q)
    if not report.ok and not allow_extrapolation:
        raise OverlapError(report)
    return report


def repeated_regression(
    source: Dataset,
    target: Dataset,
    pivot: PivotSpec,
    cfg: RegressionConfig = RegressionConfig(),
    allow_extrapolation: bool = False,
    q: int = 10,
) -> tuple[FittedModel, Dataset]:
    """Outer model for ``E[Y | X, do(target)]`` and the pseudo-labelled target."""
    _guard(source, target, pivot, allow_extrapolation, q)
    inner = fit_inner(source, pivot, cfg)
    pseudo = inner.predict(_data(target, pivot.inputs))
    augmented = target.with_column("y_tilde", pseudo)
    outer = fit_config(_data(target, pivot.x_names), pseudo, pivot.x_names, cfg, degree=cfg.outer_degree or cfg.degree)
    return outer, augmented


def two_sample_report(
    source: Dataset,
    target: Dataset,
    statistic: Callable[[Dataset, Dataset, FittedModel | None], tuple[float, FittedModel | None]],
    boot: BootstrapConfig | None,
    overlap: OverlapReport | None,
    label: str,
) -> EffectReport:
    """Point estimate plus an independent two-sample bootstrap interval."""
    est, ref = statistic(source, target, None)
    if boot is None or boot.replicates == 0:
        return EffectReport(est, math.nan, math.nan, source.n, target.n, overlap, 0, 0, math.nan, label)

    def replicate(rng):
        s = source.take(rng.integers(0, source.n, source.n))
        t = target.take(rng.integers(0, target.n, target.n))
        return statistic(s, t, ref)[0]

    lo, hi, dropped = bootstrap(replicate, boot.replicates, boot.seed, boot.level)
    return EffectReport(est, lo, hi, source.n, target.n, overlap, boot.replicates, dropped, boot.level, label)


def estimate_mean(
    source: Dataset,
    target: Dataset,
    pivot: PivotSpec,
    cfg: RegressionConfig = RegressionConfig(),
    boot: BootstrapConfig | None = BootstrapConfig(),
    allow_extrapolation: bool = False,
    q: int = 10,
) -> EffectReport:
    """``E[Y | do(target)]`` as the mean pseudo-label over the target rows."""
    report = _guard(source, target, pivot, allow_extrapolation, q)

    def stat(s, t, warm):
        inner = fit_inner(s, pivot, cfg, warm)
        return float(np.mean(inner.predict(_data(t, pivot.inputs)))), inner

    return two_sample_report(source, target, stat, boot, report, "mean")
