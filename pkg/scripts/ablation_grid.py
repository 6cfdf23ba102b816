"""Retrain over a grid of model settings on the object-conditioned reach corpus.

The default grid sweeps the auxiliary streams and object counts; pass
``--grid`` with a JSON object to sweep anything in ModelConfig, e.g.
``--grid '{"n_fuse_residual": [1, 2, 4]}'``.
"""

import argparse
import json
import logging
from pathlib import Path

from hoimotion.evaluate import format_table, run_ablation
from hoimotion.experiments import TINY_MODEL, pre_reach_windows
from hoimotion.model import ModelConfig
from hoimotion.synth import sample_corpus
from hoimotion.train import TrainConfig

DEFAULT_GRID = {"use_head": [True, False], "objects_per_category": [0, 1, 2]}


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--grid", default=json.dumps(DEFAULT_GRID))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--train", type=int, default=200)
    ap.add_argument("--test", type=int, default=60)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    grid = json.loads(args.grid)
    k = max([2] + list(grid.get("objects_per_category", [])))
    train_w = pre_reach_windows(sample_corpus(args.train, seed=1000 + args.seed, scenario="reach"),
                                objects_per_category=k)
    test_w = pre_reach_windows(sample_corpus(args.test, seed=2000 + args.seed, scenario="reach"),
                               objects_per_category=k)
    results = run_ablation(grid, train_w, test_w, ModelConfig(**TINY_MODEL),
                           TrainConfig(epochs=args.epochs, seed=args.seed))
    print(format_table([r for _, r in results]), end="")
    if args.out:
        args.out.write_text(json.dumps([dict(point=p, **r.to_record()) for p, r in results], indent=2) + "\n")


if __name__ == "__main__":
    main()
