"""Figures rendered from the plot-data CSVs of a run.

Only reads the CSVs written by :func:`kbench.harness.emit_plot_data`, so a
figure can always be regenerated from a finished run directory. PNG
metadata is pinned so reruns produce identical files.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (4.8, 3.4),
    "figure.dpi": 120,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "svg.hashsalt": "kbench",
}
_META = {"Software": None}


def _read(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _curve(ax, rows, ylabel):
    methods = sorted({r["method"] for r in rows})
    for method in methods:
        sel = sorted((r for r in rows if r["method"] == method), key=lambda r: float(r["accel"]))
        x = [float(r["accel"]) for r in sel]
        y = [float(r["mean"]) for r in sel]
        err = [float(r["std"]) for r in sel]
        ax.errorbar(x, y, yerr=err, marker="o", ms=4, capsize=3, label=method)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("acceleration factor")
    ax.set_ylabel(ylabel)
    if methods:
        ax.legend()


def render_figures(run_dir, out_dir=None) -> list[Path]:
    """Render ``dice_vs_accel.png``, ``ssim_vs_accel.png`` and
    ``psnr_vs_dice_scatter.png`` next to their CSVs."""
    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir is not None else run_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    with plt.rc_context(STYLE):
        for stem, ylabel in (("dice_vs_accel", "mean Dice"), ("ssim_vs_accel", "SSIM")):
            fig, ax = plt.subplots(constrained_layout=True)
            _curve(ax, _read(run_dir / f"{stem}.csv"), ylabel)
            path = out_dir / f"{stem}.png"
            fig.savefig(path, metadata=_META)
            plt.close(fig)
            written.append(path)

        rows = _read(run_dir / "psnr_vs_dice_scatter.csv")
        fig, ax = plt.subplots(constrained_layout=True)
        for method in sorted({r["method"] for r in rows}):
            sel = [r for r in rows if r["method"] == method and math.isfinite(float(r["psnr_db"]))]
            ax.scatter([float(r["psnr_db"]) for r in sel], [float(r["mean_dice"]) for r in sel],
                       s=10, alpha=0.7, label=method)
        ax.set_xlabel("PSNR [dB]")
        ax.set_ylabel("mean Dice")
        if rows:
            ax.legend()
        path = out_dir / "psnr_vs_dice_scatter.png"
        fig.savefig(path, metadata=_META)
        plt.close(fig)
        written.append(path)
    return written
