"""Deployment, retraining and baseline estimates against their oracles.

    python3 demos/effect_tasks.py --n 100000
"""

import argparse

import numpy as np

from perfshift import oracle
from perfshift.effects import (
    baseline_predictor,
    deployment_effect_post,
    deployment_effect_pre,
    naive_retrain,
    retraining_effect,
)
from perfshift.estimator import BootstrapConfig, PivotSpec
from perfshift.scenarios import get_scenario
from perfshift.scm import OFF, DomainSetting, IDEAL_EXAMPLE1, sample, sigmoid


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replicates", type=int, default=200)
    args = p.parse_args()
    n, seed = args.n, args.seed
    z = PivotSpec(("A",))
    boot = BootstrapConfig(args.replicates, 0.9, seed)
    off, on = DomainSetting(0, OFF), DomainSetting(1, IDEAL_EXAMPLE1)

    sc = get_scenario("example1_randomized")
    tau = oracle.exact_effects(sc, IDEAL_EXAMPLE1, IDEAL_EXAMPLE1)[0].value
    pre = deployment_effect_pre(sample(sc, off, n, seed), sample(sc, on, n, seed + 1).unlabeled(), z, boot=boot)
    post = deployment_effect_post(sample(sc, on, n, seed + 2), sample(sc, off, n, seed + 3).unlabeled(), z, boot=boot)
    print(f"tau before deployment  {pre.estimate:+.4f} [{pre.ci_low:+.4f}, {pre.ci_high:+.4f}]  oracle {tau:+.4f}")
    print(f"tau after deployment   {post.estimate:+.4f} [{post.ci_low:+.4f}, {post.ci_high:+.4f}]  oracle {tau:+.4f}")

    naive = naive_retrain(sample(sc, on, n, seed + 4))
    rho_true = oracle.exact_effects(sc, naive, IDEAL_EXAMPLE1)[1].value
    rho = retraining_effect(sample(sc, on, n, seed + 5), sample(sc, DomainSetting(1, naive), n, seed + 6).unlabeled(),
                            z, boot=boot)
    print(f"rho of naive retrain   {rho.estimate:+.4f} [{rho.ci_low:+.4f}, {rho.ci_high:+.4f}]  oracle {rho_true:+.4f}")

    ex = get_scenario("example1_explore")
    deployed = sample(ex, on, n, seed + 7)
    base = baseline_predictor(deployed, sample(ex, off, n, seed + 8).unlabeled(), z)
    grid = np.linspace(0.0, 1.0, 11)
    fitted, naive_fit = base.predict({"x": grid}), naive_retrain(deployed).predict({"x": grid})
    print("\n   x   true   baseline  naive")
    for x, t, b, v in zip(grid, sigmoid(grid - 0.5), fitted, naive_fit):
        print(f"{x:5.2f} {t:6.3f} {b:9.3f} {v:6.3f}")


if __name__ == "__main__":
    main()
