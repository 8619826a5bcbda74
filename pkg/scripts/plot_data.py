"""Turn a sweep CSV into gnuplot data blocks, one per distance.

    python scripts/plot_data.py results/acceptance/memory.csv > memory.dat
    gnuplot> plot for [i=0:2] 'memory.dat' index i using 1:2:3:4 with yerrorlines
"""

import argparse
import sys
from collections import defaultdict
from pathlib import Path

from tcnot.cli import _observable_counts, fit_points, read_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv")
    ap.add_argument("--metric", default="total", help="total, x, z or an observable name")
    args = ap.parse_args()
    path = Path(args.csv)
    rows = read_rows(path)
    pts = fit_points(rows, args.metric, _observable_counts(path))
    by_d = defaultdict(list)
    for d, p, rate, sigma in pts:
        by_d[d].append((p, rate, max(0.0, rate - 1.96 * sigma), rate + 1.96 * sigma))
    out = sys.stdout
    out.write(f"# {path.name} metric={args.metric}\n# p p_L ci_low ci_high\n")
    for d in sorted(by_d):
        out.write(f"# d={d}\n")
        for row in sorted(by_d[d]):
            out.write(" ".join(f"{v:.6g}" for v in row) + "\n")
        out.write("\n\n")


if __name__ == "__main__":
    main()
