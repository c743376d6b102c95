import math

import numpy as np
import pytest

from perfshift import oracle
from perfshift.scenarios import example1_discrete, get_scenario, prop3, prop4
from perfshift.scm import OFF, DomainSetting, IDEAL_EXAMPLE1, constant_predictor, linear_predictor, sample, sigmoid

# closed form of E[Y | do(D=1, ideal)] for the alarm example: int_0^1/2 sigma(x - 1/2) dx
DEPLOYED_MEAN = math.log(2.0) - math.log1p(math.exp(-0.5))
TAU_IDEAL = DEPLOYED_MEAN - 0.5


def test_example1_means_closed_form(example1, off, ideal):
    on = oracle.exact_mean(example1, ideal)
    assert on.method == "quadrature"
    assert abs(on.value - DEPLOYED_MEAN) <= 1e-8
    assert on.abs_error_bound <= 1e-8
    assert abs(oracle.exact_mean(example1, off).value - 0.5) <= 1e-9


def test_example1_effects(example1):
    tau, rho = oracle.exact_effects(example1, IDEAL_EXAMPLE1, constant_predictor(0.0))
    assert abs(tau.value - TAU_IDEAL) <= 1e-8
    assert abs(tau.value - (-0.28095)) < 1e-4
    assert abs(rho.value - TAU_IDEAL) <= 1e-8  # never-alarm deployed equals off


def test_monte_carlo_agrees_with_quadrature(randomized, ideal):
    truth = oracle.exact_mean(randomized, ideal).value
    y = sample(randomized, ideal, 400_000, 21)["y"]
    assert abs(y.mean() - truth) < 4 * y.std() / math.sqrt(len(y))


def test_conditional_curve_matches_closed_form(example1, off, ideal):
    grid = np.linspace(0.01, 0.99, 25)
    assert np.allclose(oracle.conditional_curve(example1, off, grid), sigmoid(grid - 0.5), atol=1e-12)
    deployed = oracle.conditional_curve(example1, ideal, grid)
    assert np.allclose(deployed, sigmoid(grid - 0.5) * (grid <= 0.5), atol=1e-12)


def test_zero_probability_conditioning(example1, off):
    with pytest.raises(oracle.ZeroProbabilityError):
        oracle.exact_cond_expectation(example1, off, {"A": 1.0})
    with pytest.raises(oracle.ZeroProbabilityError):
        oracle.exact_cond_expectation(example1, off, {"x": 2.0})


def test_conditioning_on_pivot(randomized, ideal):
    # given A=0 the outcome is the untreated risk whatever the domain
    v = oracle.exact_cond_expectation(randomized, ideal, {"x": 0.8, "A": 0.0}).value
    assert abs(v - sigmoid(0.3)) < 1e-12


def test_identification_mediator_valid_pivot(off, ideal):
    sc = get_scenario("mediator_confounded")
    res = oracle.verify_identification(sc, off, ideal, ("A", "C"))
    assert res["max_abs_gap"] <= 1e-6
    assert abs(res["mean_lhs"] - res["mean_rhs"]) <= 1e-6


def test_identification_mediator_broken_pivot(off, ideal):
    sc = get_scenario("mediator_confounded")
    res = oracle.verify_identification(sc, off, ideal, ("A",))
    assert res["max_abs_gap"] > 0.05


def test_identification_selection(ideal, off):
    sc = get_scenario("selection")
    res = oracle.verify_identification(sc, ideal, off, ("A", "C", "M"), {"s_sample": 1, "s_label": 1})
    assert res["max_abs_gap"] <= 1e-6


def test_identification_needs_overlap(example1, randomized, off, ideal):
    with pytest.raises(oracle.AbsoluteContinuityError, match="x"):
        oracle.verify_identification(example1, off, ideal, ("A",))
    res = oracle.verify_identification(randomized, off, ideal, ("A",))
    assert res["max_abs_gap"] <= 1e-6


def test_finite_scenario_enumeration():
    sc = prop4(1, d=1)
    v = oracle.exact_mean(sc, DomainSetting(1, IDEAL_EXAMPLE1))
    assert v.method == "enumeration" and v.value == 1.0 and v.abs_error_bound == 0.0


def test_prop3_pair():
    res = oracle.nonid_demo(prop3(1), prop3(2), DomainSetting(1, linear_predictor(0.5)), DomainSetting(0, OFF),
                            np.linspace(-2, 2, 9))
    assert res["source_distribution_equal"]
    x = np.array(res["probes"])
    assert np.allclose(res["target_ce_a"], 1 + x, atol=1e-12)
    assert np.allclose(res["target_ce_b"], 2 + x, atol=1e-12)


def test_prop3_pair_agrees_at_source():
    # the two members also agree on the source conditional expectation
    src = DomainSetting(1, linear_predictor(0.5))
    g = np.array([-1.0, 0.0, 1.5])
    assert np.allclose(oracle.conditional_curve(prop3(1), src, g), oracle.conditional_curve(prop3(2), src, g))


def test_prop4_pair():
    res = oracle.nonid_demo(prop4(1), prop4(2), DomainSetting(0, OFF), DomainSetting(1, IDEAL_EXAMPLE1))
    assert res["source_distribution_equal"]
    assert res["target_ce_a"] == [1.0, 1.0]
    assert res["target_ce_b"] == [0.5, 0.5]
    res0 = oracle.nonid_demo(prop4(1, d=0), prop4(2, d=0), DomainSetting(1, IDEAL_EXAMPLE1), DomainSetting(0, OFF))
    assert res0["source_distribution_equal"] and res0["target_ce_a"] == [0.0, 0.0]


def test_unsupported_noise_rejected(example1, ideal):
    sc = get_scenario("prop3_m1")
    # Gaussian x is fine; a Gaussian noise elsewhere is not
    from perfshift.scenarios import affine, var
    from perfshift.scm import Noise, Scenario

    bad = Scenario(sc.name, sc.nodes, {**sc.noises, "E_extra": Noise("gaussian", (0.0, 1.0))},
                   {**sc.equations, "y": affine(0.0, (1.0, sc.equations["y"]), (1.0, var("E_extra")))},
                   sc.parents, sc.pivot)
    with pytest.raises(oracle.OracleError):
        oracle.exact_mean(bad, DomainSetting(0, OFF))


def test_baseline_optimality_passes():
    for residual in (0.0, 0.4):
        sc = example1_discrete(10, residual)
        res = oracle.verify_baseline_optimality(sc, oracle.baseline_table(sc))
        assert res["passed"], res


def test_never_alarm_foil_fails():
    sc = example1_discrete(10)
    res = oracle.verify_baseline_optimality(sc, constant_predictor(0.0))
    assert not res["criterion_i"] and not res["passed"]


def test_always_alarm_foil_fails():
    sc = example1_discrete(10, residual_risk=0.4)
    res = oracle.verify_baseline_optimality(sc, constant_predictor(1.0))
    assert not res["criterion_ii"] and not res["passed"]


def test_baseline_optimality_requires_threshold_form(example1):
    with pytest.raises(oracle.OracleError, match="threshold"):
        oracle.verify_baseline_optimality(get_scenario("prop4_m1"), OFF)
