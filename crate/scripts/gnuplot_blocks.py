#!/usr/bin/env python3
"""Convert a momentum-risk CSV file into gnuplot data blocks.

Rows are grouped by the --by columns; each group becomes one block (separated
by two blank lines, addressable with gnuplot's `index`) holding the --cols
columns. Non-finite values ("inf", "nan") are written as "NaN" so gnuplot
skips them.

    scripts/gnuplot_blocks.py out/experiment6.csv --by noise,method,theta --cols k,R_hat
    scripts/gnuplot_blocks.py out/pareto.csv --by method --cols rho,R --where frontier=1
"""

import argparse
import csv
import math
import sys


def number(text):
    try:
        v = float(text)
    except ValueError:
        return "NaN"
    return repr(v) if math.isfinite(v) else "NaN"


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("csv")
    ap.add_argument("--by", default="", help="comma-separated grouping columns")
    ap.add_argument("--cols", required=True, help="comma-separated data columns")
    ap.add_argument("--where", action="append", default=[], help="filter COLUMN=VALUE (repeatable)")
    args = ap.parse_args()

    by = [c for c in args.by.split(",") if c]
    cols = args.cols.split(",")
    filters = [w.split("=", 1) for w in args.where]

    groups = {}
    with open(args.csv, newline="") as f:
        reader = csv.DictReader(f)
        missing = [c for c in by + cols + [k for k, _ in filters] if c not in reader.fieldnames]
        if missing:
            sys.exit(f"unknown column(s): {', '.join(missing)}; have {', '.join(reader.fieldnames)}")
        for row in reader:
            if all(row[k] == v for k, v in filters):
                key = tuple(row[c] for c in by)
                groups.setdefault(key, []).append([number(row[c]) for c in cols])

    out = sys.stdout
    for i, (key, rows) in enumerate(groups.items()):
        if i:
            out.write("\n\n")
        label = " ".join(f"{c}={v}" for c, v in zip(by, key))
        out.write(f"# block {i}: {label}\n" if label else f"# block {i}\n")
        out.write("# " + " ".join(cols) + "\n")
        for r in rows:
            out.write(" ".join(r) + "\n")


if __name__ == "__main__":
    main()
