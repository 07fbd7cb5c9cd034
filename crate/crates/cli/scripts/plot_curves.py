"""Plot exploitability curves from one or more run directories.

usage: python plot_curves.py RUN_DIR [RUN_DIR ...] [-o curves.png]

Runs sharing a method are averaged per iteration.
"""
import argparse
import collections
import csv
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(dirs):
    sums = collections.defaultdict(lambda: collections.defaultdict(list))
    for d in dirs:
        with open(pathlib.Path(d) / "exploitability.csv", newline="") as f:
            for row in csv.DictReader(f):
                sums[row["method"]][int(row["iteration"])].append(float(row["e_total_mA"]))
    return sums


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("runs", nargs="+")
    ap.add_argument("-o", "--output", default="curves.png")
    ap.add_argument("--log", action="store_true", help="log-scale y axis")
    args = ap.parse_args()
    for method, by_t in sorted(load(args.runs).items()):
        ts = sorted(by_t)
        plt.plot(ts, [sum(by_t[t]) / len(by_t[t]) for t in ts], label=method)
    plt.xlabel("iteration")
    plt.ylabel("exploitability (mA/g)")
    if args.log:
        plt.yscale("log")
    plt.legend()
    plt.savefig(args.output, dpi=120, bbox_inches="tight")
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
