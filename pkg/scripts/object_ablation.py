"""Full model vs pose-only model on reaches whose target only the scene reveals.

Runs one training pair per seed and prints arm-joint MPJPE for each.

    python scripts/object_ablation.py --seeds 0 1 2 3 4
"""

import argparse
import json
import logging
from pathlib import Path

from hoimotion.evaluate import format_table
from hoimotion.experiments import AblationSetup, run_object_ablation


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--epochs", type=int, default=AblationSetup.epochs)
    ap.add_argument("--train", type=int, default=AblationSetup.n_train)
    ap.add_argument("--test", type=int, default=AblationSetup.n_test)
    ap.add_argument("--out", type=Path, help="write all reports to this JSON file")
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    setup = AblationSetup(n_train=args.train, n_test=args.test, epochs=args.epochs)
    records = []
    for seed in args.seeds:
        r = run_object_ablation(seed, setup)
        print(f"seed {seed}")
        print(format_table([r.full, r.pose_only, r.zero_velocity]))
        print(f"full model is {100 * r.improvement:.1f}% below pose-only\n", flush=True)
        records.append({"seed": seed, "improvement": r.improvement,
                        "reports": [x.to_record() for x in (r.full, r.pose_only, r.zero_velocity)]})
    wins = sum(rec["improvement"] >= 0.10 for rec in records)
    print(f"{wins}/{len(records)} seeds with at least 10% improvement")
    if args.out:
        args.out.write_text(json.dumps(records, indent=2) + "\n")


if __name__ == "__main__":
    main()
