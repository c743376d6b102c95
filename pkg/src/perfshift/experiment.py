"""Multi-epoch deploy/retrain loop driven by a JSON config.

Each epoch samples data under the domain chosen by its rule. Rules that train
a new model estimate its effect before it is deployed and deploy only when the
upper confidence bound of that effect is below zero (lower y is better),
unless ``force`` is set.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import oracle
from .effects import baseline_predictor, deployment_effect_pre, naive_retrain, performative_bias, retraining_effect, write_curve
from .estimator import BootstrapConfig, PivotSpec
from .regress import FittedModel, RegressionConfig
from .scenarios import get_scenario
from .scm import OFF, DomainSetting, Scenario, concat, load_scenario, sample

RULES = ("off", "deploy-trained", "deploy-naive", "deploy-corrected", "deploy-model-file")
PIVOT_SEED_OFFSET = 1_000_003  # fresh unlabeled pivot samples use seed + offset
Z95 = 1.959963984540054


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EpochSpec:
    rule: str
    n: int = 10_000
    seed: int = 0
    force: bool = False
    model_file: str | None = None


@dataclass
class ExperimentConfig:
    scenario: str
    epochs: list
    pivot: tuple = ("A",)
    regression: RegressionConfig = RegressionConfig()
    bootstrap: BootstrapConfig = BootstrapConfig()
    out: str | None = None

    def __post_init__(self):
        self.epochs = [e if isinstance(e, EpochSpec) else EpochSpec(**e) for e in self.epochs]
        self.pivot = tuple(self.pivot)
        if not self.epochs:
            raise ConfigError("at least one epoch is required")
        for t, e in enumerate(self.epochs, 1):
            if e.rule not in RULES:
                raise ConfigError(f"epoch {t}: unknown rule {e.rule!r}; expected one of {RULES}")
            if e.rule in ("deploy-trained", "deploy-naive", "deploy-corrected") and t == 1:
                raise ConfigError(f"epoch {t}: rule {e.rule!r} needs a preceding epoch to train on")
            if e.rule == "deploy-model-file" and not e.model_file:
                raise ConfigError(f"epoch {t}: deploy-model-file needs model_file")
        seeds = [e.seed for e in self.epochs]
        if len(set(seeds)) != len(seeds):
            raise ConfigError("epoch seeds must be distinct")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "regression" in d:
            d["regression"] = RegressionConfig(**d["regression"])
        if "bootstrap" in d:
            d["bootstrap"] = BootstrapConfig(**d["bootstrap"])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "epochs": [asdict(e) for e in self.epochs], "pivot": list(self.pivot),
                "regression": self.regression.to_dict(), "bootstrap": asdict(self.bootstrap), "out": self.out}


@dataclass
class EpochReport:
    epoch: int
    rule: str
    setting: dict
    n: int
    seed: int
    mean_y: float
    ci_low: float
    ci_high: float
    effect_kind: str | None = None
    effect: dict | None = None
    decision: str = "none"
    model: dict | None = None
    files: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def resolve_scenario(ref: str) -> Scenario:
    if ref.endswith(".json") or os.path.sep in ref:
        return load_scenario(ref)
    return get_scenario(ref)


def _mean_ci(y: np.ndarray) -> tuple[float, float, float]:
    m = float(np.mean(y))
    se = float(np.std(y, ddof=1) / math.sqrt(len(y))) if len(y) > 1 else math.nan
    return m, m - Z95 * se, m + Z95 * se


def dump_json(obj: dict, path) -> None:
    payload = dict(obj)
    payload["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def run_epochs(config: ExperimentConfig) -> list[EpochReport]:
    """Execute the epoch loop; writes files under ``config.out`` when set."""
    sc = resolve_scenario(config.scenario)
    pivot = PivotSpec(config.pivot)
    cfg, boot = config.regression, config.bootstrap
    out = config.out
    if out:
        os.makedirs(out, exist_ok=True)
    reports: list[EpochReport] = []
    current = DomainSetting(0, OFF)
    prev_data = None
    history: list = []
    for t, spec in enumerate(config.epochs, 1):
        files: list[str] = []
        effect = kind = model = None
        decision = "none"
        if spec.rule == "off":
            current = DomainSetting(0, OFF)
        else:
            corrected = spec.rule == "deploy-corrected"
            if spec.rule == "deploy-model-file":
                with open(spec.model_file) as fh:
                    model = FittedModel.from_dict(json.load(fh))
            elif corrected and prev_data.setting.d == 1:
                off_pivot = sample(sc, DomainSetting(0, OFF), spec.n, spec.seed + PIVOT_SEED_OFFSET).unlabeled()
                # pool every earlier epoch; the pivot makes them valid sources alike
                pooled = concat([prev_data] + history[:-1][::-1])
                model = baseline_predictor(pooled, off_pivot, pivot, cfg)
                if out:
                    files += _write_correction_curves(sc, prev_data, model, cfg, out)
            else:
                model = naive_retrain(prev_data, cfg)
            candidate = DomainSetting(1, model)
            target = sample(sc, candidate, spec.n, spec.seed + PIVOT_SEED_OFFSET + 1).unlabeled()
            if current.d == 0:
                kind = "tau_pre"
                source = prev_data if prev_data is not None and prev_data.setting.d == 0 else \
                    sample(sc, DomainSetting(0, OFF), spec.n, spec.seed + PIVOT_SEED_OFFSET + 2)
                report = deployment_effect_pre(source, target, pivot, cfg, boot)
            else:
                kind = "rho"
                report = retraining_effect(prev_data, target, pivot, cfg, boot)
            effect = report.to_dict()
            if corrected:
                decision = "deploy"
            elif report.ci_high < 0:
                decision = "deploy"
            else:
                decision = "forced" if spec.force else "decline"
            if decision != "decline":
                current = candidate
        data = sample(sc, current, spec.n, spec.seed)
        m, lo, hi = _mean_ci(data.labeled().labels())
        rep = EpochReport(t, spec.rule, current.to_dict(), spec.n, spec.seed, m, lo, hi, kind, effect, decision,
                          model.to_dict() if model is not None else None, files)
        if out:
            data.to_csv(os.path.join(out, f"epoch_{t}_data.csv"))
            rep.files.append(f"epoch_{t}_data.csv")
            rep.files.append(f"epoch_{t}_report.json")
            dump_json(rep.to_dict(), os.path.join(out, f"epoch_{t}_report.json"))
        reports.append(rep)
        prev_data = data
        history.append(data)
    if out:
        write_curve(os.path.join(out, "epoch_means.csv"), ["epoch", "mean_y", "ci_low", "ci_high"],
                    [(r.epoch, r.mean_y, r.ci_low, r.ci_high) for r in reports])
    return reports


def _write_correction_curves(sc, deployed_data, baseline, cfg, out) -> list[str]:
    grid = np.linspace(0.0, 1.0, 101)
    fitted = baseline.predict({"x": grid})
    try:
        truth = oracle.conditional_curve(sc, DomainSetting(0, OFF), grid)
    except oracle.OracleError:
        truth = np.full(len(grid), math.nan)
    write_curve(os.path.join(out, "baseline_curve.csv"), ["x", "y_true", "y_fitted"], zip(grid, truth, fitted))
    deployed = naive_retrain(deployed_data, cfg)
    write_curve(os.path.join(out, "bias_curve.csv"), ["x", "bias"], performative_bias(deployed, baseline, grid))
    return ["baseline_curve.csv", "bias_curve.csv"]


def example1_config(corrected: bool = False, n: int = 10_000, seed: int = 0, out: str | None = None,
                    replicates: int = 200) -> ExperimentConfig:
    """The three-epoch Example 1 loop; ``corrected`` swaps the naive third epoch for the corrected one."""
    third = EpochSpec("deploy-corrected", n, seed + 3) if corrected else EpochSpec("deploy-naive", n, seed + 3, force=True)
    return ExperimentConfig(
        scenario="example1_randomized",
        epochs=[EpochSpec("off", n, seed + 1), EpochSpec("deploy-trained", n, seed + 2), third],
        pivot=("A",),
        bootstrap=BootstrapConfig(replicates, 0.9, seed),
        out=out,
    )
