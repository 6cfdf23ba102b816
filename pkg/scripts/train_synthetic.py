"""Train on synthetic walk-and-reach sequences and compare with trivial baselines.

    python scripts/train_synthetic.py --epochs 2 --out runs/learning
"""

import argparse
import dataclasses
import json
import logging
from pathlib import Path

from hoimotion.evaluate import format_table
from hoimotion.experiments import REDUCED_WIDTH, LearningSetup, run_learning
from hoimotion.train import TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--train", type=int, default=200, help="training sequences")
    ap.add_argument("--test", type=int, default=50, help="held-out sequences")
    ap.add_argument("--epochs", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--mlp-hidden", type=int, default=REDUCED_WIDTH["mlp_hidden"])
    ap.add_argument("--stride", type=int, default=10, help="window stride in the training set")
    ap.add_argument("--out", type=Path, help="directory for report.json")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    setup = LearningSetup(
        n_train=args.train, n_test=args.test, train_stride=args.stride,
        model=dict(REDUCED_WIDTH, mlp_hidden=args.mlp_hidden),
        training=TrainConfig(epochs=args.epochs, seed=args.seed),
    )
    res = run_learning(setup)
    print(format_table([res.model, res.constant_velocity, res.zero_velocity]), end="")
    print(f"\n{100 * res.improvement:.1f}% below zero velocity; {res.train_windows} training windows, "
          f"{res.seconds:.0f} s")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        record = {"setup": dataclasses.asdict(setup), "improvement": res.improvement, "seconds": res.seconds,
                  "reports": [r.to_record() for r in (res.model, res.constant_velocity, res.zero_velocity)]}
        (args.out / "report.json").write_text(json.dumps(record, indent=2) + "\n")


if __name__ == "__main__":
    main()
