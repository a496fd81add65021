"""Report writers: delimited tables, versioned JSON, and the figures
rendered next to them.

Every run artifact records the hash of its configuration and the seed,
and omits wall-clock metadata so identical configurations produce
byte-identical reports.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

FIG_DPI = 150


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def ensure_outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def _finish(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=FIG_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def fig_remainder_sweep(report_dict: dict, path) -> Path:
    """Log-log remainder size against eps with the fitted power law."""
    cases = report_dict["cases"]
    eps = np.array([c["eps"] for c in cases])
    sup = np.array([c["sup_R_B012"] for c in cases])
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.loglog(eps, sup, "o", color="tab:blue", label="sup remainder norm")
    if len(cases) >= 2 and np.isfinite(report_dict["slope"]):
        slope = report_dict["slope"]
        anchor = sup[0] / eps[0] ** slope
        xs = np.geomspace(eps.min(), eps.max(), 50)
        ax.loglog(xs, anchor * xs**slope, "--", color="tab:gray",
                  label=f"fit: slope {slope:.3f}")
    ax.set_xlabel(r"$\varepsilon = 2^{-m}$")
    ax.set_ylabel("sup of remainder norm")
    ax.legend(frameon=False)
    ax.grid(True, which="both", alpha=0.3)
    return _finish(fig, path)


def fig_norm_series(times, named_series: dict, path, ylabel="norm", logy=False) -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for name, vals in named_series.items():
        (ax.semilogy if logy else ax.plot)(times, vals, label=name)
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False, fontsize=8)
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)


def fig_block_bars(q_values, block_norms, path, xlabel="q", ylabel="block norm") -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.bar([str(q) for q in q_values], block_norms, color="tab:blue")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_yscale("log")
    return _finish(fig, path)


def fig_ratio_sweep(reports: list, path) -> Path:
    """Per-index ratio curves for the inequality suite."""
    fig, ax = plt.subplots(figsize=(5.4, 3.6))
    for rep in reports:
        if rep.per_index:
            idx = sorted(rep.per_index)
            ax.semilogy(idx, [rep.per_index[i] for i in idx], "o-", label=rep.check_id)
    ax.set_xlabel("dyadic index")
    ax.set_ylabel("max ratio")
    ax.legend(frameon=False, fontsize=8)
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)


def fig_partition(times, product_values, cuts, bound, path) -> Path:
    fig, ax = plt.subplots(figsize=(5.4, 3.2))
    ax.plot(times, product_values, color="tab:blue",
            label="chunk product from last cut")
    for c in cuts:
        ax.axvline(c, color="tab:red", alpha=0.5, lw=0.8)
    ax.axhline(bound, color="tab:gray", ls="--", label="bound 1/cbar")
    ax.set_xlabel("t")
    ax.set_ylabel("norm product")
    ax.legend(frameon=False, fontsize=8)
    return _finish(fig, path)
