"""Q coefficient of every metric on the paired simulated cases, over a seed panel.

    python scripts/q_table.py --seeds 10 --out q_table.csv
"""

import argparse
import csv
import sys

import numpy as np

from slam.harness import case_q_table, generate_case
from slam.metrics import CATALOG

CASES = ("I", "III", "IV", "V", "VI")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--cases", nargs="+", default=list(CASES))
    ap.add_argument("--out", help="CSV with one row per (case, seed)")
    args = ap.parse_args()

    rows = []
    for cid in args.cases:
        for seed in range(args.seeds):
            q = case_q_table(generate_case(cid, seed))
            rows.append({"case": cid, "seed": seed, **q})
    metrics = [m for m in CATALOG if any(m in r for r in rows)]

    print(f"{'case':<5}" + "".join(f"{m:>11}" for m in metrics))
    for cid in args.cases:
        sub = [r for r in rows if r["case"] == cid]
        means = [np.mean([r[m] for r in sub]) if m in sub[0] else float("nan") for m in metrics]
        print(f"{cid:<5}" + "".join(f"{v:>11.4f}" for v in means))
    print(f"(mean over {args.seeds} seeds; SLAM min per case: "
          + ", ".join(f"{c} {min(r['SLAM'] for r in rows if r['case'] == c):.4f}" for c in args.cases) + ")",
          file=sys.stderr)

    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["case", "seed"] + metrics, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
