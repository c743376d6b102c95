"""Three epochs of the alarm example, naive and corrected.

Epoch 1 runs without a model. Epoch 2 deploys a model trained on epoch 1
after checking that it lowers risk. Epoch 3 either retrains naively on the
deployed data (forced, since the effect check advises against it) or
deploys the baseline predictor learned through the pivot {A}.

    python3 demos/example1_loop.py --out runs/example1
"""

import argparse
import os

from perfshift.experiment import example1_config, run_epochs


def show(title, reports):
    print(title)
    for r in reports:
        eff = ""
        if r.effect is not None:
            eff = f"  {r.effect_kind}={r.effect['estimate']:+.3f} [{r.effect['ci_low']:+.3f}, {r.effect['ci_high']:+.3f}]"
        print(f"  epoch {r.epoch} {r.rule:<17} mean y={r.mean_y:.3f} ({r.ci_low:.3f}, {r.ci_high:.3f})"
              f"  decision={r.decision}{eff}")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    args = p.parse_args()
    for corrected in (False, True):
        out = os.path.join(args.out, "corrected" if corrected else "naive") if args.out else None
        reports = run_epochs(example1_config(corrected, args.n, args.seed, out))
        show("corrected third epoch" if corrected else "naive third epoch (forced)", reports)


if __name__ == "__main__":
    main()
