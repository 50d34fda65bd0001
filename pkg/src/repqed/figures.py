"""Matplotlib renderings of the experiment outputs.

Each function takes the already-computed row data and writes one PNG next to
the delimited files.  The Agg backend is forced so rendering works headless
and produces identical bytes for identical inputs.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150
_PNG_META = {"Software": "repqed"}  # fixed metadata keeps the bytes reproducible


def _save(fig, path: str) -> None:
    fig.savefig(path, dpi=_DPI, metadata=_PNG_META)
    plt.close(fig)


def parity_check_figure(
    probs: Mapping[str, Mapping[str, float]], path: str
) -> None:
    """Heatmap of declared parity probabilities per basis-state input."""
    inputs = sorted(probs)
    outcomes = ("ee", "eo", "oe", "oo")
    grid = np.array([[probs[i].get(o, 0.0) for o in outcomes] for i in inputs])
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    im = ax.imshow(grid, vmin=0.0, vmax=1.0, cmap="viridis", aspect="auto")
    ax.set_xticks(range(len(outcomes)), outcomes)
    ax.set_yticks(range(len(inputs)), inputs)
    ax.set_xlabel("declared parities $P_t P_b$")
    ax.set_ylabel("prepared input $D_t D_m D_b$")
    ax.set_title("double parity check")
    fig.colorbar(im, ax=ax, label="probability")
    fig.tight_layout()
    _save(fig, path)


def entangle_figure(
    phi_grid: Sequence[float],
    mermin_by_branch: Mapping[str, Sequence[float]],
    witness_min: Mapping[str, Sequence[float]],
    path: str,
) -> None:
    """Mermin sweep per postselection branch and Bell-witness minima."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.8))
    phis = np.asarray(phi_grid)
    ref = np.linspace(min(phi_grid), max(phi_grid), 241)
    ax1.plot(ref, 4 * np.cos(ref), color="0.7", lw=1, label=r"$4\cos\varphi$")
    for branch, values in sorted(mermin_by_branch.items()):
        ax1.plot(phis, values, marker="o", ms=3, lw=0.8, label=branch)
    ax1.axhline(2, color="k", lw=0.8, ls="--")
    ax1.axhline(-2, color="k", lw=0.8, ls="--")
    ax1.set_xlabel(r"$\varphi$ (rad)")
    ax1.set_ylabel(r"$\langle M \rangle$")
    ax1.set_title("Mermin vs phase (double stabilizer)")
    ax1.legend(fontsize=7, ncol=2)

    for name, values in sorted(witness_min.items()):
        ax2.plot(phis, values, marker="s", ms=3, lw=0.8, label=name)
    ax2.axhline(0, color="k", lw=0.8, ls="--")
    ax2.axhline(-0.5, color="0.7", lw=0.8)
    ax2.set_xlabel(r"$\varphi$ (rad)")
    ax2.set_ylabel("witness expectation")
    ax2.set_title("Bell witnesses (single stabilizer)")
    ax2.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path)


def qed_sweep_figure(
    f3q_rows: Sequence[tuple],
    fl_rows: Sequence[tuple],
    path: str,
) -> None:
    """Cardinal-averaged fidelity curves, detection vs idle, both metrics.

    Rows are (metric, scenario, pipeline, mode, p_err, cardinal, value); only
    the "average" cardinal is drawn.
    """
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.8))
    styles = {"qed": "-", "idle": "--"}
    for ax, rows, title in (
        (axes[0], f3q_rows, "three-qubit fidelity"),
        (axes[1], fl_rows, "logical fidelity (with decoder)"),
    ):
        curves: dict[tuple[str, str], list[tuple[float, float]]] = {}
        for _, scenario, pipeline, _, p, cardinal, value in rows:
            if cardinal == "average":
                curves.setdefault((scenario, pipeline), []).append((p, value))
        for (scenario, pipeline), pts in sorted(curves.items()):
            pts.sort()
            ax.plot(
                [p for p, _ in pts],
                [v for _, v in pts],
                styles[pipeline],
                marker=".",
                ms=4,
                label=f"scenario {scenario}, {pipeline}",
            )
        ax.set_xlabel(r"$p_{err}$")
        ax.set_ylabel("fidelity")
        ax.set_ylim(0.0, 1.05)
        ax.set_title(title)
        ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path)


def error_table_figure(rows: Sequence, path: str) -> None:
    """Grouped bars of logical fidelity per error-combination sub-case."""
    verdict_color = {"qed": "#2a9d3f", "idle": "#9aa0a6", "tie": "#d9dce1"}
    labels = [r.label for r in rows]
    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(9.5, 3.6))
    ax.bar(x - 0.2, [r.f_qed for r in rows], width=0.4, label="detection")
    ax.bar(x + 0.2, [r.f_idle for r in rows], width=0.4, label="idle")
    for xi, r in zip(x, rows):
        ax.axvspan(xi - 0.5, xi + 0.5, color=verdict_color[r.verdict], alpha=0.25, lw=0)
    ax.set_xticks(x, labels, rotation=60, fontsize=7)
    ax.set_ylabel("logical fidelity")
    ax.set_xlabel("first/second round error combination")
    ax.set_ylim(0.0, 1.1)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
