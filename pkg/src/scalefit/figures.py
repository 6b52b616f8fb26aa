"""Figure rendering for pipeline reports.

Each function draws one figure from report ingredients and writes a PNG next
to the delimited outputs. Rendering is headless (Agg) and optional: the
report itself never depends on these files.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .powerlaw import PowerLawParams, eval_powerlaw
from .run_store import OptimumTable
from .surge import BudgetFits, eval_surge

__all__ = [
    "render_surge_fits",
    "render_power_laws",
    "render_best_loss",
    "render_sensitivity",
]

_DPI = 130


def _save(fig, path: Path) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return str(path)


def _pow2_label(value: int) -> str:
    exp = math.log2(value)
    if exp == int(exp):
        return f"$2^{{{int(exp)}}}$"
    return f"{value:g}"


def render_surge_fits(
    table: OptimumTable, fits: BudgetFits, variant_tag: str, path: Path
) -> str:
    """Optimal lr vs batch size per budget, with the fitted bell curves."""
    budgets = fits.budgets()
    fig, ax = plt.subplots(figsize=(7, 5))
    colors = plt.cm.viridis(np.linspace(0.0, 0.9, max(len(budgets), 2)))
    for color, tokens in zip(colors, budgets):
        batches = table.batches_for(tokens)
        eta = [2.0 ** table.entries[(b, tokens)].log2_eta_star_mean for b in batches]
        band = [
            math.log(2.0) * e * table.entries[(b, tokens)].log2_eta_star_std
            for b, e in zip(batches, eta)
        ]
        ax.errorbar(
            batches,
            eta,
            yerr=band,
            fmt="o",
            color=color,
            ms=4,
            capsize=2,
            label=f"T={_pow2_label(tokens)}",
        )
        fit = next(f for f in fits.by_budget[tokens] if f.variant == variant_tag)
        bb = np.geomspace(min(batches), max(batches), 200)
        ax.plot(bb, eval_surge(fit.eta_crit, fit.b_crit, bb), "-", color=color, lw=1)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log", base=2)
    ax.set_xlabel("batch size (tokens)")
    ax.set_ylabel("optimal learning rate")
    ax.set_title(f"per-budget fits ({variant_tag})")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def render_power_laws(
    points: Mapping[str, Sequence[tuple[float, float, float]]],
    laws: Mapping[str, PowerLawParams],
    path: Path,
) -> str:
    """Fitted critical parameters over budget with their final laws."""
    fig, axes = plt.subplots(1, len(points), figsize=(6 * len(points), 4.5))
    if len(points) == 1:
        axes = [axes]
    for ax, (target, pts) in zip(axes, points.items()):
        T = [p[0] for p in pts]
        y = [p[1] for p in pts]
        err = [p[2] for p in pts]
        ax.errorbar(T, y, yerr=err, fmt="o", ms=4, capsize=2, label="per-budget fits")
        law = laws.get(target)
        if law is not None:
            tt = np.geomspace(min(T), max(T) * 4, 200)
            ax.plot(tt, eval_powerlaw(law, tt), "-", lw=1.2, label="fixed-exponent law")
        ax.set_xscale("log", base=2)
        ax.set_yscale("log", base=2)
        ax.set_xlabel("token budget")
        ax.set_ylabel(target)
        ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def render_best_loss(
    tables: Mapping[int, Mapping[int, tuple[float, float]]], path: Path
) -> str:
    """Best achievable loss per batch size, one curve per budget."""
    fig, ax = plt.subplots(figsize=(7, 5))
    colors = plt.cm.viridis(np.linspace(0.0, 0.9, max(len(tables), 2)))
    for color, (tokens, table) in zip(colors, sorted(tables.items())):
        batches = sorted(table)
        losses = [table[b][0] for b in batches]
        ax.plot(batches, losses, "o-", color=color, ms=4, lw=1,
                label=f"T={_pow2_label(tokens)}")
        b_star = min(batches, key=lambda b: table[b][0])
        ax.plot([b_star], [table[b_star][0]], "*", color=color, ms=13)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("batch size (tokens)")
    ax.set_ylabel("best validation loss over lr grid")
    ax.set_title("best loss per batch (stars mark the optimum)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def render_sensitivity(rows: Sequence[Sequence], path: Path) -> str:
    """Loss penalty vs lr ratio, one series per (batch, budget) label."""
    series: dict[str, list[tuple[float, float]]] = {}
    for x, y, label in rows:
        series.setdefault(str(label), []).append((float(x), float(y)))
    fig, ax = plt.subplots(figsize=(7, 5))
    colors = plt.cm.plasma(np.linspace(0.0, 0.9, max(len(series), 2)))
    for color, (label, pts) in zip(colors, series.items()):
        pts = sorted(pts)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-",
                color=color, ms=3, lw=1, label=label)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("lr / optimal lr")
    ax.set_ylabel("loss penalty")
    ax.set_title("learning-rate sensitivity")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)
