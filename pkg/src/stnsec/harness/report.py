"""Delimited output and figure rendering for experiment runs.

Every CSV starts with '#' comment lines carrying the configuration hash,
seed, and artifact version, so outputs are self-identifying and a rerun
with the same (hash, seed) is byte-identical.  Each report CSV gets a
companion PNG rendered alongside it.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .. import __version__

__all__ = ["write_csv", "read_rows", "render_fig3", "render_trend", "render_training_curve"]


def stamp_lines(config_hash: str, seed, extra: dict | None = None) -> list[str]:
    lines = [f"artifact_version={__version__}", f"config_hash={config_hash}", f"seed={seed}"]
    for k, v in (extra or {}).items():
        lines.append(f"{k}={v}")
    return lines


def write_csv(path: str | Path, rows: list[dict], config_hash: str, seed, extra: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for line in stamp_lines(config_hash, seed, extra):
            fh.write(f"# {line}\n")
        if rows:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _fmt(v) for k, v in row.items()})
    return path


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def read_rows(path: str | Path) -> list[dict]:
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def render_fig3(rows: list[dict], path: str | Path) -> Path:
    """Theory-vs-simulation panels: one per (family, metric)."""
    path = Path(path)
    fams = sorted({r["family"] for r in rows})
    metrics = sorted({r["metric"] for r in rows})
    fig, axes = plt.subplots(len(metrics), len(fams), figsize=(9, 7), squeeze=False)
    for i, metric in enumerate(metrics):
        for j, fam in enumerate(fams):
            ax = axes[i][j]
            pts = [r for r in rows if r["family"] == fam and r["metric"] == metric]
            xs = [float(r["tx_power_dbm"]) for r in pts]
            theory = [float(r["theory"]) for r in pts]
            mc = [float(r["mc_estimate"]) for r in pts]
            se = [float(r["std_error"]) for r in pts]
            ax.plot(xs, theory, "-", color="tab:blue", label="closed form")
            ax.errorbar(xs, mc, yerr=[3 * s for s in se], fmt="o", ms=4,
                        color="tab:red", label="Monte Carlo")
            ax.set_title(f"{fam} {metric}")
            ax.set_xlabel("transmit power (dBm)")
            ax.set_ylabel(metric)
            ax.grid(alpha=0.3)
            ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_trend(rows: list[dict], axis_name: str, value_key: str, path: str | Path,
                 group_key: str = "method", ylabel: str | None = None) -> Path:
    """Per-method median curves over a swept axis."""
    path = Path(path)
    methods = sorted({r[group_key] for r in rows})
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for m in methods:
        pts = [r for r in rows if r[group_key] == m]
        xs = sorted({float(r[axis_name]) for r in pts})
        med = []
        lo, hi = [], []
        for x in xs:
            vals = [float(r[value_key]) for r in pts if float(r[axis_name]) == x]
            med.append(np.median(vals))
            lo.append(np.min(vals))
            hi.append(np.max(vals))
        ax.plot(xs, med, "o-", label=m)
        ax.fill_between(xs, lo, hi, alpha=0.15)
    ax.set_xlabel(axis_name)
    ax.set_ylabel(ylabel or value_key)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_training_curve(curve: list[dict], path: str | Path) -> Path:
    path = Path(path)
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    eps = [row["episode"] for row in curve]
    axes[0].plot(eps, [row["reward"] for row in curve], lw=1)
    axes[0].set_xlabel("episode")
    axes[0].set_ylabel("episode reward")
    axes[0].grid(alpha=0.3)
    losses = [row["loss"] for row in curve]
    axes[1].plot(eps, losses, lw=1, color="tab:orange")
    axes[1].set_xlabel("episode")
    axes[1].set_ylabel("mean TD loss")
    axes[1].set_yscale("log")
    axes[1].grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
