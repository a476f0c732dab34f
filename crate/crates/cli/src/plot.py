"""Plots a levelset artifact directory. Reads only the CSV files."""

import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def read_snapshot(path):
    xs, ys, us = [], [], []
    with open(path) as f:
        for row in csv.reader(f):
            if not row or row[0].startswith("#"):
                continue
            vals = [float(v) for v in row]
            xs.append(vals[0])
            if len(vals) == 3:
                ys.append(vals[1])
            us.append(vals[-1])
    return xs, ys, us


def last_snapshots():
    last = {}
    with open(os.path.join(HERE, "manifest.csv")) as f:
        for row in csv.DictReader(f):
            last[row["run"]] = row["file"]
    return last


def plot_profiles():
    fig, ax = plt.subplots(figsize=(7, 4))
    drew = False
    for run, rel in sorted(last_snapshots().items()):
        xs, ys, us = read_snapshot(os.path.join(HERE, rel))
        if ys:
            continue
        ax.plot(xs, us, label=run)
        drew = True
    if drew:
        ax.set_xlabel("x")
        ax.set_ylabel("u at final time")
        ax.legend(fontsize="small")
        fig.savefig(os.path.join(HERE, "profiles.png"), dpi=120, bbox_inches="tight")
    plt.close(fig)


def plot_convergence():
    path = os.path.join(HERE, "convergence.csv")
    if not os.path.exists(path):
        return
    with open(path) as f:
        rows = list(csv.reader(f))
    name = rows[0][0]
    ps = [float(r[0]) for r in rows[1:]]
    es = [float(r[1]) for r in rows[1:]]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(ps, es, "o-")
    ax.set_xlabel(name)
    ax.set_ylabel("error")
    fig.savefig(os.path.join(HERE, "convergence.png"), dpi=120, bbox_inches="tight")
    plt.close(fig)


if __name__ == "__main__":
    plot_profiles()
    plot_convergence()
    sys.exit(0)
