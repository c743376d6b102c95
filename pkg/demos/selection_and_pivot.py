"""Selection correction and the post-hoc pivot diagnostic.

The selection part compares the corrected estimator with naive regression
on the selected sample. The diagnostic part runs the stratified G-test on
a valid and a broken pivot. A non-rejection is not evidence that a pivot is
valid; that argument has to come from the causal model.

    python3 demos/selection_and_pivot.py
"""

import argparse

import numpy as np

from perfshift import oracle
from perfshift.estimator import PivotSpec, direct_regression
from perfshift.pivot import pivot_diagnostic
from perfshift.scenarios import get_scenario
from perfshift.scm import OFF, DomainSetting, IDEAL_EXAMPLE1, sample
from perfshift.selection import corrected_estimate, observe


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    off, on = DomainSetting(0, OFF), DomainSetting(1, IDEAL_EXAMPLE1)
    grid = np.linspace(0.0, 1.0, 101)

    sc = get_scenario("selection")
    src = observe(sample(sc, on, args.n, args.seed))
    tgt = sample(sc, off, args.n, args.seed + 1).unlabeled()
    truth = oracle.conditional_curve(sc, off, grid)
    corrected = corrected_estimate(src, tgt, PivotSpec(("A", "C", "M"))).predict({"x": grid})
    naive = direct_regression(src.labeled()).predict({"x": grid})
    print(f"selected {src.n} of {args.n} units, {src.labeled().n} labelled")
    print(f"sup error corrected {np.max(np.abs(corrected - truth)):.4f}, naive {np.max(np.abs(naive - truth)):.4f}")

    med = get_scenario("mediator_confounded")
    data = [sample(med, off, 10_000, args.seed + 2), sample(med, on, 10_000, args.seed + 3)]
    for z in (("A", "C"), ("A",)):
        res = pivot_diagnostic(data, PivotSpec(z))
        print(f"pivot {{x, {', '.join(z)}}}: G={res.statistic:.1f} df={res.df} p={res.p_value:.3g} "
              f"reject={res.reject} dropped strata={res.dropped}")


if __name__ == "__main__":
    main()
