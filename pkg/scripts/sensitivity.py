"""SLAM score over the ten Case II error steps at several KDE bandwidths.

    python scripts/sensitivity.py --out sensitivity.csv
"""

import argparse
import csv

from slam.harness import DEFAULT_H_VALUES, sensitivity_sweep, spearman_by_h


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h-values", type=float, nargs="+", default=list(DEFAULT_H_VALUES))
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="sensitivity.csv")
    args = ap.parse_args()

    rows = sensitivity_sweep(args.h_values, threads=args.threads)
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)

    steps = sorted({r["step"] for r in rows})
    print(f"{'h':>7} {'rho':>6}  " + " ".join(f"{s:>8d}" for s in steps))
    rho = spearman_by_h(rows)
    for h, r in rho.items():
        ds = [row["slam"] for row in rows if row["h"] == h]
        print(f"{h:>7g} {r:>6.3f}  " + " ".join(f"{d:>8.4f}" for d in ds))


if __name__ == "__main__":
    main()
