"""Wall-clock time of one SLAM evaluation as the spot count and label count grow.

    python scripts/complexity.py --out complexity.csv
"""

import argparse
import csv

from slam.core import EvaluationConfig
from slam.harness import complexity_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--spot-counts", type=int, nargs="*", default=[10, 100, 1000, 10000])
    ap.add_argument("--label-counts", type=int, nargs="*", default=[5, 7, 9, 11, 13, 15])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="complexity.csv")
    args = ap.parse_args()

    rows = complexity_sweep(args.spot_counts, args.label_counts, EvaluationConfig(rng_seed=args.seed),
                            progress=print)
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    main()
