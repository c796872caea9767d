#!/usr/bin/env python3
"""Render figures from the CSVs written by `eibnb`.

    python3 scripts/plot_curves.py OUT_DIR [--fig-dir DIR]

Every CSV family found in OUT_DIR is plotted; missing ones are skipped.
"""
import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

LABELS = {"bnb": "BNB", "ga": "GA", "static": "static", "ei_full": "full EI", "ei_mod": "modified EI"}


def band(ax, df, x, label):
    df = df.sort_values(x)
    ax.plot(df[x], df["mean"], marker=".", label=label)
    se = df["stderr"].fillna(0.0)
    ax.fill_between(df[x], df["mean"] - se, df["mean"] + se, alpha=0.2)


def longrun(src, dst):
    agg = pd.read_csv(src / "longrun_aggregate.csv")
    metrics = [m for m in ("fmin_est", "fmax_est", "d_k") if m in set(agg["metric"])]
    fig, axes = plt.subplots(1, len(metrics), figsize=(5 * len(metrics), 4), squeeze=False)
    for ax, metric in zip(axes[0], metrics):
        for method, df in agg[agg["metric"] == metric].groupby("method"):
            band(ax, df, "k", LABELS.get(method, method))
        ax.set(xlabel="new points k", title=metric)
        ax.legend()
    fig.tight_layout()
    fig.savefig(dst / "longrun.png", dpi=120)


def direct(src, dst):
    agg = pd.read_csv(src / "direct_aggregate.csv")
    fig, ax = plt.subplots(figsize=(5, 4))
    for method, df in agg.groupby("method"):
        ax.errorbar(df["n0"], df["mean"], yerr=df["stderr"].fillna(0.0), marker="o", capsize=3,
                    label=LABELS.get(method, method))
    ax.set(xlabel="initial design size n0", ylabel="mean maximized EI")
    ax.legend()
    fig.tight_layout()
    fig.savefig(dst / "direct.png", dpi=120)


def study(src, dst):
    agg = pd.read_csv(src / "study_aggregate.csv").dropna(subset=["mean"])
    fig, ax = plt.subplots(figsize=(5, 4))
    for crit, df in agg.groupby("method"):
        band(ax, df, "k", LABELS.get(crit, crit))
    ax.set(xlabel="new points k", ylabel="proportion near contour", ylim=(0, 1.05))
    ax.legend()
    fig.tight_layout()
    fig.savefig(dst / "study.png", dpi=120)


def derivatives(src, dst):
    df = pd.read_csv(src / "derivatives.csv")
    alpha = df["alpha"].iloc[0]
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for s, g in df.groupby("s"):
        axes[0].plot(g["t"], g["d_dt"], label=f"s = {s:g}")
        axes[1].plot(g["t"], g["d_ds"], label=f"s = {s:g}")
    for ax, name in zip(axes, ("d/dt", "d/ds")):
        ax.axhline(0, color="grey", lw=0.5)
        ax.set(xlabel="t", title=f"{name} of modified contour EI, alpha = {alpha:g}")
        ax.legend()
    fig.tight_layout()
    fig.savefig(dst / "derivatives.png", dpi=120)


PLOTS = {
    "longrun_aggregate.csv": longrun,
    "direct_aggregate.csv": direct,
    "study_aggregate.csv": study,
    "derivatives.csv": derivatives,
}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--fig-dir", type=Path, help="defaults to OUT_DIR")
    args = ap.parse_args()
    dst = args.fig_dir or args.out_dir
    dst.mkdir(parents=True, exist_ok=True)
    found = [(name, fn) for name, fn in PLOTS.items() if (args.out_dir / name).exists()]
    if not found:
        raise SystemExit(f"no eibnb CSVs in {args.out_dir}")
    for name, fn in found:
        fn(args.out_dir, dst)
        print(f"plotted {name}")


if __name__ == "__main__":
    main()
