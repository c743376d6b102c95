import json
import math

import numpy as np
import pytest

from perfshift import oracle
from perfshift.effects import (
    DomainMismatchError,
    baseline_predictor,
    deployment_effect_post,
    deployment_effect_pre,
    naive_retrain,
    performative_bias,
    retraining_effect,
    write_curve,
)
from perfshift.estimator import BootstrapConfig, OverlapError, PivotSpec, direct_regression, estimate_mean
from perfshift.regress import RegressionConfig
from perfshift.scenarios import get_scenario
from perfshift.scm import OFF, DomainSetting, IDEAL_EXAMPLE1, constant_predictor, sample, sigmoid

Z = PivotSpec(("A",))
GRID = np.linspace(0.0, 1.0, 101)
NEVER, ALWAYS = constant_predictor(0.0), constant_predictor(1.0)


def _pair(sc, source, target, n, seed):
    return sample(sc, source, n, seed), sample(sc, target, n, seed + 1).unlabeled()


def _overlaps(a, b):
    return a.ci_low <= b.ci_high and b.ci_low <= a.ci_high


def test_domain_tags_enforced(randomized, off, ideal):
    src, tgt = _pair(randomized, ideal, off, 500, 0)
    with pytest.raises(DomainMismatchError):
        deployment_effect_pre(src, tgt, Z, boot=None)
    with pytest.raises(DomainMismatchError):
        deployment_effect_post(tgt, src, Z, boot=None)
    with pytest.raises(DomainMismatchError):
        retraining_effect(src, tgt, Z, boot=None)
    with pytest.raises(DomainMismatchError):
        baseline_predictor(tgt, src, Z)


def test_tau_pre_example1(randomized, off, ideal):
    src, tgt = _pair(randomized, off, ideal, 100_000, 10)
    rep = deployment_effect_pre(src, tgt, Z, boot=None)
    tau = oracle.exact_effects(randomized, IDEAL_EXAMPLE1, IDEAL_EXAMPLE1)[0].value
    assert abs(rep.estimate - tau) <= 0.02
    assert abs(rep.estimate - (-0.28095)) <= 0.02


def test_tau_pre_never_alarm(example1, off):
    # nothing changes when the alarm never fires; overlap holds even without exploration
    src, tgt = _pair(example1, off, DomainSetting(1, NEVER), 20_000, 12)
    rep = deployment_effect_pre(src, tgt, Z, boot=None)
    assert abs(rep.estimate) <= 0.02


def test_tau_pre_always_alarm(randomized, off):
    src, tgt = _pair(randomized, off, DomainSetting(1, ALWAYS), 100_000, 14)
    rep = deployment_effect_pre(src, tgt, Z, boot=None)
    tau = oracle.exact_effects(randomized, ALWAYS, ALWAYS)[0].value
    assert abs(rep.estimate - tau) <= 0.02
    # exploration keeps 5% of units untreated, hence -0.47 rather than -0.5
    assert abs(tau - (-0.5)) < 0.035


def test_tau_pre_always_alarm_needs_overlap(example1, off):
    src, tgt = _pair(example1, off, DomainSetting(1, ALWAYS), 5000, 14)
    with pytest.raises(OverlapError):
        deployment_effect_pre(src, tgt, Z, boot=None)


def test_decomposition_identity(randomized, off, ideal):
    src, tgt = _pair(randomized, off, ideal, 10_000, 16)
    tau = deployment_effect_pre(src, tgt, Z, boot=None).estimate
    mean = estimate_mean(src, tgt, Z, boot=None).estimate
    assert tau == mean - src["y"].mean()


def test_tau_post_explore(explore, off, ideal):
    src, tgt = _pair(explore, ideal, off, 100_000, 18)
    rep = deployment_effect_post(src, tgt, Z, boot=None)
    tau = oracle.exact_effects(explore, IDEAL_EXAMPLE1, IDEAL_EXAMPLE1)[0].value
    assert abs(rep.estimate - tau) <= 0.03


def test_tau_post_never_alarm(example1, off):
    src, tgt = _pair(example1, DomainSetting(1, NEVER), off, 20_000, 20)
    assert abs(deployment_effect_post(src, tgt, Z, boot=None).estimate) <= 0.02


def test_tau_post_pure_example1_overlap(example1, off, ideal):
    src, tgt = _pair(example1, ideal, off, 5000, 22)
    with pytest.raises(OverlapError) as info:
        deployment_effect_post(src, tgt, Z, boot=None)
    assert info.value.report.violations


def test_pre_and_post_agree(randomized, off, ideal):
    boot = BootstrapConfig(100, 0.9, 3)
    pre = deployment_effect_pre(*_pair(randomized, off, ideal, 20_000, 24), Z, boot=boot)
    post = deployment_effect_post(*_pair(randomized, ideal, off, 20_000, 26), Z, boot=boot)
    assert _overlaps(pre, post)


def test_rho_same_parameters(randomized, ideal):
    src, tgt = _pair(randomized, ideal, ideal, 20_000, 28)
    assert abs(retraining_effect(src, tgt, Z, boot=None).estimate) <= 0.02


def test_rho_naive_model(randomized, ideal):
    naive = naive_retrain(sample(randomized, ideal, 100_000, 30))
    src, tgt = _pair(randomized, ideal, DomainSetting(1, naive), 100_000, 31)
    rep = retraining_effect(src, tgt, Z, boot=BootstrapConfig(50, 0.9, 0))
    rho = oracle.exact_effects(randomized, naive, IDEAL_EXAMPLE1)[1].value
    assert rho > 0.2
    assert abs(rep.estimate - rho) <= 0.03
    assert rep.ci_low > 0


def test_rho_always_alarm(randomized, ideal):
    src, tgt = _pair(randomized, ideal, DomainSetting(1, ALWAYS), 100_000, 33)
    rep = retraining_effect(src, tgt, Z, boot=None)
    rho = oracle.exact_effects(randomized, ALWAYS, IDEAL_EXAMPLE1)[1].value
    assert rep.estimate < 0
    assert abs(rep.estimate - rho) <= 0.03


def test_rho_antisymmetric(randomized):
    a, b = DomainSetting(1, IDEAL_EXAMPLE1), DomainSetting(1, ALWAYS)
    boot = BootstrapConfig(100, 0.9, 5)
    ab = retraining_effect(*_pair(randomized, b, a, 20_000, 35), Z, boot=boot)
    ba = retraining_effect(*_pair(randomized, a, b, 20_000, 37), Z, boot=boot)
    neg = type(ba)(-ba.estimate, -ba.ci_high, -ba.ci_low, ba.n_source, ba.n_target)
    assert _overlaps(ab, neg)


def test_example1_signs_at_moderate_n(randomized, off, ideal):
    boot = BootstrapConfig(100, 0.9, 7)
    tau = deployment_effect_pre(*_pair(randomized, off, ideal, 10_000, 40), Z, boot=boot)
    assert tau.ci_high < 0
    naive = naive_retrain(sample(randomized, ideal, 10_000, 42))
    rho = retraining_effect(*_pair(randomized, ideal, DomainSetting(1, naive), 10_000, 43), Z, boot=boot)
    assert rho.ci_low > 0


def test_baseline_predictor_explore(explore, off, ideal):
    model = baseline_predictor(*_pair(explore, ideal, off, 100_000, 50), Z)
    assert np.max(np.abs(model.predict({"x": GRID}) - sigmoid(GRID - 0.5))) <= 0.03


def test_baseline_predictor_inactive_deployment(example1, off):
    src, tgt = _pair(example1, DomainSetting(1, NEVER), off, 50_000, 52)
    model = baseline_predictor(src, tgt, Z)
    direct = direct_regression(src)
    assert np.max(np.abs(model.predict({"x": GRID}) - direct.predict({"x": GRID}))) <= 0.02


def test_baseline_predictor_finite_states(off, ideal):
    sc = get_scenario("example1_binary_explore")
    model = baseline_predictor(*_pair(sc, ideal, off, 100_000, 54), Z)
    states = np.array([0.25, 0.75])
    truth = oracle.conditional_curve(sc, off, states)
    assert np.max(np.abs(model.predict({"x": states}) - truth)) <= 0.02


@pytest.mark.slow
def test_baseline_performatively_stable(explore, off, ideal):
    # two independent estimates each have standard error ~0.024 at x=1 when
    # n=1e5, so the comparison is made at n=1e6
    first = baseline_predictor(*_pair(explore, ideal, off, 1_000_000, 56), Z)
    again = baseline_predictor(*_pair(explore, DomainSetting(1, first), off, 1_000_000, 58), Z)
    assert np.max(np.abs(first.predict({"x": GRID}) - again.predict({"x": GRID}))) <= 0.03


def test_performative_bias_identical_models(explore, ideal):
    m = naive_retrain(sample(explore, ideal, 2000, 1))
    assert all(b == 0.0 for _, b in performative_bias(m, m, GRID))


def test_performative_bias_example1(example1, explore, off, ideal):
    # a quintic basis keeps the ringing from the jump at 1/2 below the tolerance at x = 0.25
    cfg = RegressionConfig(degree=5)
    deployed = naive_retrain(sample(example1, ideal, 100_000, 60), cfg)
    baseline = baseline_predictor(*_pair(explore, ideal, off, 100_000, 61), Z, cfg)
    bias = dict(performative_bias(deployed, baseline, [0.25, 0.75]))
    assert abs(bias[0.75] + sigmoid(0.25)) <= 0.03
    assert abs(bias[0.25]) <= 0.03


def test_performative_bias_input_mismatch(randomized, ideal):
    ds = sample(randomized, ideal, 2000, 1)
    from perfshift.estimator import fit_inner

    with pytest.raises(ValueError):
        performative_bias(naive_retrain(ds), fit_inner(ds, Z), GRID)


def test_naive_retrain_underestimates(example1, ideal):
    m = naive_retrain(sample(example1, ideal, 100_000, 62))
    assert m.predict({"x": np.array([0.75])})[0] <= 0.1


def test_naive_retrain_matches_baseline_without_deployment(example1, off):
    for setting in (off, DomainSetting(1, NEVER)):
        m = naive_retrain(sample(example1, setting, 100_000, 66))
        assert np.max(np.abs(m.predict({"x": GRID}) - sigmoid(GRID - 0.5))) <= 0.02


def test_report_json_and_curve_csv(tmp_path, randomized, off, ideal):
    rep = deployment_effect_pre(*_pair(randomized, off, ideal, 5000, 70), Z, boot=BootstrapConfig(50))
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["ci_low"] <= d["estimate"] <= d["ci_high"]
    write_curve(tmp_path / "bias.csv", ["x", "bias"], [(0.0, -0.1), (1.0, 0.2)])
    assert (tmp_path / "bias.csv").read_text().splitlines() == ["x,bias", "0.0,-0.1", "1.0,0.2"]
