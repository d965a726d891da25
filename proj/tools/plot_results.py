#!/usr/bin/env python3
"""Plot OSPA, OSPA(2) and cardinality curves from the summary CSVs of `plmb_cli run`."""

import argparse
import csv
import pathlib
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

COLUMNS = ("step", "ospa_mean", "ospa2_mean", "card_true_mean", "card_est_mean")


def read_summary(path):
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        rows = list(reader)
    return {c: [float(r[c]) for r in rows] for c in COLUMNS}


def plot_case(case, series, out_dir):
    fig, axes = plt.subplots(3, 1, figsize=(7, 9), sharex=True)
    truth_drawn = False
    for method, s in sorted(series.items()):
        axes[0].plot(s["step"], s["ospa_mean"], label=method)
        axes[1].plot(s["step"], s["ospa2_mean"], label=method)
        if not truth_drawn:
            axes[2].plot(s["step"], s["card_true_mean"], "k--", label="truth")
            truth_drawn = True
        axes[2].plot(s["step"], s["card_est_mean"], label=method)
    axes[0].set_ylabel("OSPA (m)")
    axes[1].set_ylabel("OSPA(2) (m)")
    axes[2].set_ylabel("cardinality")
    axes[2].set_xlabel("time step")
    for ax in axes:
        ax.grid(True, alpha=0.3)
        ax.legend()
    axes[0].set_title(f"Case {case}")
    fig.tight_layout()
    path = out_dir / f"case_{case}.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--in", dest="in_dir", required=True, type=pathlib.Path, help="directory written by run")
    parser.add_argument("--out", type=pathlib.Path, help="image directory (defaults to --in)")
    args = parser.parse_args(argv)
    out_dir = args.out or args.in_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    cases = {}
    for path in sorted(args.in_dir.glob("summary_*_*.csv")):
        _, case, method = path.stem.split("_", 2)
        cases.setdefault(case, {})[method] = read_summary(path)
    if not cases:
        print(f"error: no summary_<case>_<method>.csv files in {args.in_dir}", file=sys.stderr)
        return 1
    for case, series in sorted(cases.items()):
        print(plot_case(case, series, out_dir))
    return 0


if __name__ == "__main__":
    sys.exit(main())
