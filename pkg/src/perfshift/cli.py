"""Command line runner for simulations, effect estimates and diagnostics.

Every subcommand prints a JSON report on stdout, writes it under ``--out``
and exits 0 on success. Failures print ``{"error": ..., "message": ...}`` and
exit 1; usage errors exit 2.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings

import numpy as np

from . import oracle
from .effects import (
    baseline_predictor,
    deployment_effect_post,
    deployment_effect_pre,
    naive_retrain,
    performative_bias,
    retraining_effect,
    write_curve,
)
from .estimator import BootstrapConfig, OverlapError, PivotSpec, direct_regression
from .experiment import ExperimentConfig, _json_default, dump_json, resolve_scenario, run_epochs
from .pivot import pivot_diagnostic, write_strata_csv
from .regress import FittedModel, RegressionConfig
from .scenarios import get_scenario, prop3, prop4, scenario_library
from .scm import (
    IDEAL_EXAMPLE1,
    OFF,
    DomainSetting,
    constant_predictor,
    fingerprint,
    linear_predictor,
    logistic_predictor,
    sample,
)
from .selection import corrected_estimate, observe

GRID = np.linspace(0.0, 1.0, 101)


class UsageError(ValueError):
    pass


def parse_theta(text: str):
    """``off``, ``ideal``, ``constant:v``, ``logistic:slope,intercept``, ``linear:slope,intercept`` or a model JSON path."""
    if text in ("off", "none"):
        return OFF
    if text == "ideal":
        return IDEAL_EXAMPLE1
    kind, _, rest = text.partition(":")
    try:
        vals = [float(v) for v in rest.split(",")] if rest else []
        if kind == "constant" and len(vals) == 1:
            return constant_predictor(vals[0])
        if kind == "logistic" and len(vals) == 2:
            return logistic_predictor(*vals)
        if kind == "linear" and len(vals) in (1, 2):
            return linear_predictor(*vals)
    except ValueError:
        pass
    if os.path.exists(text):
        with open(text) as fh:
            return FittedModel.from_dict(json.load(fh))
    raise UsageError(f"cannot parse theta {text!r}")


def _common(p: argparse.ArgumentParser, scenario: str = "example1", n: int = 10_000) -> None:
    p.add_argument("--scenario", default=scenario)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=n)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--config", default=None, help="JSON file of flag defaults")


def _boot(p: argparse.ArgumentParser) -> None:
    p.add_argument("--replicates", type=int, default=200)
    p.add_argument("--level", type=float, default=0.9)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--pivot", default=None, help="comma-separated z names (default: scenario pivot)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perfshift", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample a dataset from a scenario")
    _common(p)
    p.add_argument("--d", type=int, choices=(0, 1), default=0)
    p.add_argument("--theta", default="ideal")

    p = sub.add_parser("effect", help="deployment (t1a, t1b) or retraining (t2) effect")
    p.add_argument("task", choices=("t1a", "t1b", "t2"))
    _common(p)
    _boot(p)
    p.add_argument("--theta", default=None, help="deployed parameters (t2 default: naive retrain)")
    p.add_argument("--theta-prev", default="ideal", help="current parameters for t2")
    p.add_argument("--allow-extrapolation", action="store_true")

    p = sub.add_parser("baseline", help="baseline predictor from deployed data (t3)")
    _common(p, "example1_explore")
    _boot(p)
    p.add_argument("--theta", default="ideal")
    p.add_argument("--allow-extrapolation", action="store_true")

    p = sub.add_parser("selection-demo", help="corrected vs naive regression under selection")
    _common(p, "selection", 100_000)
    _boot(p)
    p.add_argument("--theta", default="ideal")

    p = sub.add_parser("verify-oracle", help="check the transport formula exactly")
    _common(p, "mediator_confounded")
    p.add_argument("--pivot", default=None)
    p.add_argument("--source-d", type=int, choices=(0, 1), default=0)
    p.add_argument("--target-d", type=int, choices=(0, 1), default=1)
    p.add_argument("--theta", default="ideal")

    p = sub.add_parser("nonid-demo", help="non-identifiability pairs")
    _common(p)
    p.add_argument("--pair", choices=("prop3", "prop4"), required=True)
    p.add_argument("--target-d", type=int, choices=(0, 1), default=1, help="prop4 target domain")

    p = sub.add_parser("pivot-check", help="stratified G-test of a pivot on pooled labelled data")
    _common(p, "mediator_confounded")
    p.add_argument("--pivot", default=None)
    p.add_argument("--theta", default="ideal")
    p.add_argument("--bins", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.05)

    p = sub.add_parser("epochs", help="run a multi-epoch experiment from --config")
    _common(p, "example1_randomized")
    p.add_argument("--preset", choices=("naive", "corrected"), default=None)
    p.add_argument("--replicates", type=int, default=200)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config and args.command != "epochs":
        try:
            with open(args.config) as fh:
                defaults = {k.replace("-", "_"): v for k, v in json.load(fh).items()}
        except (OSError, ValueError, AttributeError) as exc:
            parser.error(f"cannot read config {args.config!r}: {exc}")
        unknown = set(defaults) - set(vars(args))
        if unknown:
            parser.error(f"unknown config keys: {sorted(unknown)}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _scenario(args, parser):
    try:
        return resolve_scenario(args.scenario)
    except (KeyError, FileNotFoundError) as exc:
        parser.error(f"unknown scenario {args.scenario!r} ({exc}); known: {sorted(scenario_library())}")


def _pivot(args, sc) -> PivotSpec:
    z = sc.pivot if args.pivot is None else tuple(v for v in args.pivot.split(",") if v)
    return PivotSpec(tuple(z))


def _emit(payload: dict, args, name: str) -> dict:
    payload = {"command": args.command, **payload}
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        dump_json(payload, os.path.join(args.out, name))
    return payload


def _oracle_or_none(fn):
    try:
        return fn()
    except oracle.OracleError:
        return None


def cmd_simulate(args, parser):
    sc = _scenario(args, parser)
    setting = DomainSetting(args.d, parse_theta(args.theta) if args.d else OFF)
    ds = sample(sc, setting, args.n, args.seed)
    files = []
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        ds.to_csv(os.path.join(args.out, "data.csv"))
        files.append("data.csv")
    lab = ds.labeled()
    return _emit({"scenario": sc.name, "setting": setting.to_dict(), "n": ds.n, "seed": args.seed,
                  "n_selected": lab.n, "mean_y_labeled": lab.mean_y() if lab.n else None,
                  "fingerprint": fingerprint(ds), "files": files}, args, "simulate_report.json")


def _regression(args) -> RegressionConfig:
    return RegressionConfig(degree=args.degree)


def cmd_effect(args, parser):
    sc = _scenario(args, parser)
    pivot = _pivot(args, sc)
    cfg, boot = _regression(args), BootstrapConfig(args.replicates, args.level, args.seed)
    off = DomainSetting(0, OFF)
    if args.task == "t2":
        prev = parse_theta(args.theta_prev)
        if args.theta is None:
            # the naive model: direct regression on data from the current deployment
            theta = naive_retrain(sample(sc, DomainSetting(1, prev), args.n, args.seed + 2), cfg)
        else:
            theta = parse_theta(args.theta)
        source = sample(sc, DomainSetting(1, prev), args.n, args.seed)
        target = sample(sc, DomainSetting(1, theta), args.n, args.seed + 1).unlabeled()
        report = retraining_effect(source, target, pivot, cfg, boot, args.allow_extrapolation)
        truth = _oracle_or_none(lambda: oracle.exact_effects(sc, theta, prev)[1].value)
    else:
        theta = parse_theta(args.theta or "ideal")
        on = DomainSetting(1, theta)
        if args.task == "t1a":
            source = sample(sc, off, args.n, args.seed)
            target = sample(sc, on, args.n, args.seed + 1).unlabeled()
            report = deployment_effect_pre(source, target, pivot, cfg, boot, args.allow_extrapolation)
        else:
            source = sample(sc, on, args.n, args.seed)
            target = sample(sc, off, args.n, args.seed + 1).unlabeled()
            report = deployment_effect_post(source, target, pivot, cfg, boot, args.allow_extrapolation)
        truth = _oracle_or_none(lambda: oracle.exact_effects(sc, theta, theta)[0].value)
    result = report.to_dict()
    result.update(task=args.task, scenario=sc.name, pivot=list(pivot.z_names), theta=getattr(theta, "theta_id", None),
                  oracle=truth, deploy=bool(report.ci_high < 0))
    return _emit(result, args, "effect_report.json")


def cmd_baseline(args, parser):
    sc = _scenario(args, parser)
    pivot = _pivot(args, sc)
    cfg = _regression(args)
    theta = parse_theta(args.theta)
    source = sample(sc, DomainSetting(1, theta), args.n, args.seed)
    target = sample(sc, DomainSetting(0, OFF), args.n, args.seed + 1).unlabeled()
    model = baseline_predictor(source, target, pivot, cfg, args.allow_extrapolation)
    naive = naive_retrain(source, cfg)
    fitted = model.predict({"x": GRID})
    truth = _oracle_or_none(lambda: oracle.conditional_curve(sc, DomainSetting(0, OFF), GRID))
    bias = performative_bias(naive, model, GRID)
    files = []
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        y_true = truth if truth is not None else np.full(len(GRID), math.nan)
        write_curve(os.path.join(args.out, "baseline_curve.csv"), ["x", "y_true", "y_fitted"], zip(GRID, y_true, fitted))
        write_curve(os.path.join(args.out, "bias_curve.csv"), ["x", "bias"], bias)
        files = ["baseline_curve.csv", "bias_curve.csv"]
    return _emit({
        "scenario": sc.name, "pivot": list(pivot.z_names), "model": model.to_dict(),
        "sup_error": float(np.max(np.abs(fitted - truth))) if truth is not None else None,
        "naive_at_0.75": float(naive.predict({"x": np.array([0.75])})[0]),
        "baseline_at_0.75": float(model.predict({"x": np.array([0.75])})[0]),
        "files": files,
    }, args, "baseline_report.json")


def cmd_selection_demo(args, parser):
    sc = _scenario(args, parser)
    pivot = _pivot(args, sc)
    cfg = _regression(args)
    source = observe(sample(sc, DomainSetting(1, parse_theta(args.theta)), args.n, args.seed))
    target = sample(sc, DomainSetting(0, OFF), args.n, args.seed + 1).unlabeled()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        corrected = corrected_estimate(source, target, pivot, cfg)
    naive = direct_regression(source.labeled(), cfg)
    truth = _oracle_or_none(lambda: oracle.conditional_curve(sc, DomainSetting(0, OFF), GRID))
    c_fit, n_fit = corrected.predict({"x": GRID}), naive.predict({"x": GRID})
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        y_true = truth if truth is not None else np.full(len(GRID), math.nan)
        write_curve(os.path.join(args.out, "selection_curve.csv"), ["x", "y_true", "y_corrected", "y_naive"],
                    zip(GRID, y_true, c_fit, n_fit))
    return _emit({
        "scenario": sc.name, "pivot": list(pivot.z_names), "n_observed": source.n, "n_labeled": source.labeled().n,
        "corrected_sup_error": float(np.max(np.abs(c_fit - truth))) if truth is not None else None,
        "naive_sup_error": float(np.max(np.abs(n_fit - truth))) if truth is not None else None,
        "warnings": [str(w.message) for w in caught],
    }, args, "selection_report.json")


def cmd_verify_oracle(args, parser):
    sc = _scenario(args, parser)
    theta = parse_theta(args.theta)
    setting = lambda d: DomainSetting(d, theta if d else OFF)  # noqa: E731
    cond = {"s_sample": 1, "s_label": 1} if "s_sample" in sc.names else None
    z = sc.pivot if args.pivot is None else tuple(v for v in args.pivot.split(",") if v)
    res = oracle.verify_identification(sc, setting(args.source_d), setting(args.target_d), z, cond)
    res = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in res.items()}
    res.update(scenario=sc.name, pivot=list(z), passed=bool(res["max_abs_gap"] <= 1e-6))
    return _emit(res, args, "oracle_report.json")


def cmd_nonid_demo(args, parser):
    if args.pair == "prop3":
        a, b = prop3(1), prop3(2)
        source, target = DomainSetting(1, linear_predictor(0.5)), DomainSetting(0, OFF)
        probes = np.linspace(-2.0, 2.0, 9)
    else:
        d = args.target_d
        a, b = prop4(1, d), prop4(2, d)
        source, target = DomainSetting(1 - d, IDEAL_EXAMPLE1 if d == 0 else OFF), DomainSetting(d, IDEAL_EXAMPLE1 if d else OFF)
        probes = None
    res = oracle.nonid_demo(a, b, source, target, probes)
    res["pair"] = args.pair
    return _emit(res, args, "nonid_report.json")


def cmd_pivot_check(args, parser):
    sc = _scenario(args, parser)
    pivot = _pivot(args, sc)
    a = sample(sc, DomainSetting(0, OFF), args.n, args.seed)
    b = sample(sc, DomainSetting(1, parse_theta(args.theta)), args.n, args.seed + 1)
    res = pivot_diagnostic([a, b], pivot, args.bins, args.alpha)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_strata_csv(res, os.path.join(args.out, "pivot_strata.csv"), ["x_bin", *pivot.z_names])
    out = res.to_dict()
    out.update(scenario=sc.name, pivot=list(pivot.z_names))
    return _emit(out, args, "pivot_report.json")


def cmd_epochs(args, parser):
    from .experiment import example1_config

    if args.config:
        cfg = ExperimentConfig.load(args.config)
        if args.out:
            cfg.out = args.out
    elif args.preset:
        cfg = example1_config(args.preset == "corrected", args.n, args.seed, args.out, args.replicates)
    else:
        raise UsageError("epochs needs --config or --preset")
    reports = run_epochs(cfg)
    return _emit({"config": cfg.to_dict(), "epochs": [r.to_dict() for r in reports]}, args, "experiment_report.json")


COMMANDS = {
    "simulate": cmd_simulate,
    "effect": cmd_effect,
    "baseline": cmd_baseline,
    "selection-demo": cmd_selection_demo,
    "verify-oracle": cmd_verify_oracle,
    "nonid-demo": cmd_nonid_demo,
    "pivot-check": cmd_pivot_check,
    "epochs": cmd_epochs,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = _apply_config(parser, argv)
    try:
        payload = COMMANDS[args.command](args, parser)
        status = 0
    except UsageError as exc:
        parser.error(str(exc))
    except OverlapError as exc:
        payload = {"error": "OverlapError", "message": str(exc), "overlap": exc.report.to_dict()}
        status = 1
    except (ValueError, RuntimeError, OSError, np.linalg.LinAlgError) as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        status = 1
    json.dump(payload, sys.stdout, indent=2, sort_keys=True, default=_json_default)
    sys.stdout.write("\n")
    return status


if __name__ == "__main__":
    sys.exit(main())
