#!/usr/bin/env python3
"""Render recall-vs-QPS curves from a caps sweep CSV.

Usage:
    plot_sweep.py sweep.csv [-o sweep.png]
    plot_sweep.py unhappy.csv --unhappy [-o unhappy.png]
"""

import argparse
import csv
import sys
from collections import defaultdict


def read_rows(path):
    with open(path) as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def plot_sweep(rows, output):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series = defaultdict(list)
    for row in rows:
        series[row["config_id"]].append(
            (float(row["recall"]), float(row["qps"]), int(row["m"]))
        )

    fig, ax = plt.subplots(figsize=(7, 5))
    for config_id, points in sorted(series.items()):
        points.sort(key=lambda p: p[2])
        ax.plot(
            [p[0] for p in points],
            [p[1] for p in points],
            marker="o",
            label=config_id,
        )
    ax.set_xlabel("recall@k")
    ax.set_ylabel("QPS (single thread)")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(output, dpi=130)
    print(f"wrote {output}")


def plot_unhappy(rows, output):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = [float(r["sparsity"]) for r in rows]
    fig, ax = plt.subplots(figsize=(7, 5))
    for column, label in [
        ("cost_filter_then_search", "filter, then search"),
        ("cost_search_then_filter", "search, then filter"),
        ("cost_caps", "interleaved (caps)"),
    ]:
        ax.plot(xs, [float(r[column]) for r in rows], marker="o", label=label)
    ax.set_xlabel("constraint sparsity")
    ax.set_ylabel("distance computations per query")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(output, dpi=130)
    print(f"wrote {output}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv_path")
    parser.add_argument("-o", "--output", default=None)
    parser.add_argument("--unhappy", action="store_true",
                        help="input is an unhappy-middle CSV")
    args = parser.parse_args()

    rows = read_rows(args.csv_path)
    if not rows:
        sys.exit("no data rows in " + args.csv_path)
    output = args.output or args.csv_path.rsplit(".", 1)[0] + ".png"
    if args.unhappy:
        plot_unhappy(rows, output)
    else:
        plot_sweep(rows, output)


if __name__ == "__main__":
    main()
