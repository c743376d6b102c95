"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line; the lines are repeated in the
terminal summary under "acceptance criteria". Seeds are fixed up front.
"""

import time

import numpy as np

from perfshift import oracle
from perfshift.effects import baseline_predictor, deployment_effect_pre, naive_retrain, retraining_effect
from perfshift.estimator import BootstrapConfig, PivotSpec, direct_regression
from perfshift.experiment import example1_config, run_epochs
from perfshift import regress
from perfshift.pivot import pivot_diagnostic
from perfshift.scenarios import example1_discrete, get_scenario, prop3, prop4
from perfshift.scm import OFF, DomainSetting, IDEAL_EXAMPLE1, constant_predictor, linear_predictor, sample, sigmoid
from perfshift.selection import corrected_estimate, observe

Z = PivotSpec(("A",))
GRID = np.linspace(0.0, 1.0, 101)
TAU_CLOSED_FORM = -0.28095
OFF_SETTING = DomainSetting(0, OFF)
ON = DomainSetting(1, IDEAL_EXAMPLE1)


def _t1a(sc, n, seed, boot=None, allow=False):
    src = sample(sc, OFF_SETTING, n, seed)
    tgt = sample(sc, ON, n, seed + 1).unlabeled()
    return deployment_effect_pre(src, tgt, Z, boot=boot, allow_extrapolation=allow)


def test_criterion_01_identification_oracle(acceptance):
    start = time.perf_counter()
    med = oracle.verify_identification(get_scenario("mediator_confounded"), OFF_SETTING, ON, ("A", "C"))
    sel = oracle.verify_identification(get_scenario("selection"), ON, OFF_SETTING, ("A", "C", "M"),
                                       {"s_sample": 1, "s_label": 1})
    elapsed = time.perf_counter() - start
    gap = max(med["max_abs_gap"], sel["max_abs_gap"])
    acceptance(1, gap <= 1e-6 and elapsed < 10,
               f"max_abs_gap mediator={med['max_abs_gap']:.1e} selection={sel['max_abs_gap']:.1e}, {elapsed:.1f}s")


def test_criterion_02_nonidentifiability(acceptance):
    start = time.perf_counter()
    probes = np.linspace(-2.0, 2.0, 9)
    p3 = oracle.nonid_demo(prop3(1), prop3(2), DomainSetting(1, linear_predictor(0.5)), OFF_SETTING, probes)
    ok3 = (p3["source_distribution_equal"] and np.allclose(p3["target_ce_a"], 1 + probes, atol=1e-12)
           and np.allclose(p3["target_ce_b"], 2 + probes, atol=1e-12))
    ok4 = True
    for d in (0, 1):
        src = DomainSetting(1 - d, IDEAL_EXAMPLE1 if d == 0 else OFF)
        tgt = DomainSetting(d, IDEAL_EXAMPLE1 if d else OFF)
        p4 = oracle.nonid_demo(prop4(1, d), prop4(2, d), src, tgt)
        ok4 &= (p4["source_distribution_equal"] and np.allclose(p4["target_ce_a"], d, atol=1e-12)
                and np.allclose(p4["target_ce_b"], 0.5, atol=1e-12))
    elapsed = time.perf_counter() - start
    acceptance(2, bool(ok3 and ok4) and elapsed < 5,
               f"prop3 1+x vs 2+x {'ok' if ok3 else 'wrong'}, prop4 d vs 1/2 {'ok' if ok4 else 'wrong'}, {elapsed:.2f}s")


def test_criterion_03_deployment_effect(acceptance):
    sc = get_scenario("example1_randomized")
    truth = oracle.exact_effects(sc, IDEAL_EXAMPLE1, IDEAL_EXAMPLE1)[0].value
    start = time.perf_counter()
    rep = _t1a(sc, 100_000, 7, boot=BootstrapConfig(200, 0.9, 7))
    elapsed = time.perf_counter() - start
    ok = (abs(rep.estimate - truth) <= 0.02 and abs(rep.estimate - TAU_CLOSED_FORM) <= 0.02
          and rep.estimate < 0 and elapsed < 60)
    acceptance(3, ok, f"tau_hat={rep.estimate:.4f} oracle={truth:.4f} closed form={TAU_CLOSED_FORM} "
                      f"90% CI [{rep.ci_low:.4f}, {rep.ci_high:.4f}], {elapsed:.1f}s with R=200")


def test_criterion_04_retraining_effect(acceptance):
    sc = get_scenario("example1_randomized")
    naive = naive_retrain(sample(sc, ON, 10_000, 42))
    src = sample(sc, ON, 10_000, 40)
    tgt = sample(sc, DomainSetting(1, naive), 10_000, 41).unlabeled()
    rep = retraining_effect(src, tgt, Z, boot=BootstrapConfig(200, 0.9, 40))
    acceptance(4, rep.estimate > 0 and rep.ci_low > 0,
               f"rho_hat={rep.estimate:.4f} 90% CI [{rep.ci_low:.4f}, {rep.ci_high:.4f}]")


def test_criterion_05_bias_correction(acceptance):
    sc = get_scenario("example1_explore")
    seed = 50  # declared before the run; not searched
    src = sample(sc, ON, 100_000, seed)
    tgt = sample(sc, OFF_SETTING, 100_000, seed + 1).unlabeled()
    model = baseline_predictor(src, tgt, Z)
    err = np.abs(model.predict({"x": GRID}) - sigmoid(GRID - 0.5))
    gap = float(sigmoid(0.25) - naive_retrain(src).predict({"x": np.array([0.75])})[0])
    acceptance(5, err.max() <= 0.03 and gap >= 0.4,
               f"baseline sup error={err.max():.4f} at x={GRID[err.argmax()]:.2f}, naive underestimate at 0.75={gap:.3f}")


def test_criterion_06_epoch_patterns(acceptance):
    e1, e2, e3 = run_epochs(example1_config(corrected=False, n=10_000, seed=0))
    naive_ok = e2.mean_y < e1.mean_y and e3.mean_y > e2.mean_y and e3.decision == "forced"
    _, c2, c3 = run_epochs(example1_config(corrected=True, n=10_000, seed=0))
    se = lambda r: (r.ci_high - r.ci_low) / (2 * 1.959963984540054)  # noqa: E731
    band = 1.96 * np.hypot(se(c2), se(c3))
    corrected_ok = abs(c3.mean_y - c2.mean_y) <= band
    acceptance(6, naive_ok and corrected_ok,
               f"naive E1..E3={e1.mean_y:.3f},{e2.mean_y:.3f},{e3.mean_y:.3f}; "
               f"corrected |E3-E2|={abs(c3.mean_y - c2.mean_y):.4f} <= {band:.4f}")


def test_criterion_07_selection_correction(acceptance):
    sc = get_scenario("selection")
    truth = oracle.conditional_curve(sc, OFF_SETTING, GRID)
    src = observe(sample(sc, ON, 100_000, 70))
    tgt = sample(sc, OFF_SETTING, 100_000, 71).unlabeled()
    corrected = np.max(np.abs(corrected_estimate(src, tgt, PivotSpec(("A", "C", "M"))).predict({"x": GRID}) - truth))
    naive = np.max(np.abs(direct_regression(src.labeled()).predict({"x": GRID}) - truth))
    acceptance(7, corrected <= 0.03 and naive >= 0.05,
               f"corrected sup error={corrected:.4f}, naive sup error={naive:.4f}")


def test_criterion_08_consistency(acceptance):
    # at n=1e3 every seed has too few A=1 rows in the off domain for the overlap guard,
    # so all sizes run with extrapolation allowed
    sc = get_scenario("example1_randomized")
    truth = oracle.exact_effects(sc, IDEAL_EXAMPLE1, IDEAL_EXAMPLE1)[0].value
    medians = []
    for n in (1_000, 10_000, 100_000):
        errs = [abs(_t1a(sc, n, 10_000 + 2 * s, allow=True).estimate - truth) for s in range(20)]
        medians.append(float(np.median(errs)))
    ok = medians[0] >= medians[1] >= medians[2]
    acceptance(8, ok, "median |tau_hat - tau| at n=1e3,1e4,1e5: " + ", ".join(f"{m:.4f}" for m in medians))


def test_criterion_09_pivot_diagnostic(acceptance):
    sc = get_scenario("mediator_confounded")
    valid, broken = [], []
    for s in range(200):
        data = [sample(sc, OFF_SETTING, 10_000, 20_000 + 2 * s), sample(sc, ON, 10_000, 20_001 + 2 * s)]
        valid.append(pivot_diagnostic(data, PivotSpec(("A", "C"))).reject)
        broken.append(pivot_diagnostic(data, PivotSpec(("A",))).reject)
    rv, rb = float(np.mean(valid)), float(np.mean(broken))
    acceptance(9, rv <= 0.08 and rb >= 0.9, f"rejection valid={rv:.3f}, broken={rb:.3f} over 200 seeds")


def test_criterion_10_bootstrap_coverage(acceptance):
    sc = get_scenario("example1_randomized")
    truth = oracle.exact_effects(sc, IDEAL_EXAMPLE1, IDEAL_EXAMPLE1)[0].value
    covered = 0
    for r in range(50):
        rep = _t1a(sc, 10_000, 30_000 + 2 * r, boot=BootstrapConfig(200, 0.9, r))
        covered += rep.ci_low <= truth <= rep.ci_high
    acceptance(10, covered / 50 >= 0.8, f"90% intervals covered the oracle in {covered}/50 repetitions")


def test_criterion_11_baseline_optimality(acceptance):
    default = example1_discrete(10)
    risky = example1_discrete(10, residual_risk=0.4)
    baseline = oracle.verify_baseline_optimality(default, oracle.baseline_table(default))["passed"]
    baseline_risky = oracle.verify_baseline_optimality(risky, oracle.baseline_table(risky))["passed"]
    never = oracle.verify_baseline_optimality(default, constant_predictor(0.0))["passed"]
    always = oracle.verify_baseline_optimality(risky, constant_predictor(1.0))["passed"]
    acceptance(11, baseline and baseline_risky and not never and not always,
               f"baseline passes={baseline and baseline_risky}, never-alarm passes={never}, always-alarm passes={always}")


def test_criterion_12_regression_kernel(acceptance):
    rng = np.random.default_rng(12)
    x = rng.uniform(0, 1, 100_000)
    y = (rng.uniform(size=x.size) < sigmoid(x - 0.5)).astype(float)
    m = regress.fit({"x": x}, y, ["x"], degree=1)
    intercept, slope = m.raw_coefficients()
    basis = m.feature_map.transform({"x": x})
    beta = np.array(m.coefficients)
    g = regress.gradient(beta, basis, y, m.ridge)
    fd = regress.finite_difference_gradient(beta, basis, y, m.ridge)
    rel = float(np.linalg.norm(g - fd) / max(1.0, np.linalg.norm(g), np.linalg.norm(fd)))
    ok = rel <= 1e-4 and abs(slope - 1.0) <= 0.1 and abs(intercept + 0.5) <= 0.06
    acceptance(12, ok, f"gradient rel error={rel:.1e}, slope={slope:.4f}, intercept={intercept:.4f}")
