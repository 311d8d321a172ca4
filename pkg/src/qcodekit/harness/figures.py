"""Matplotlib renderings of evaluation reports.

The report path writes figures next to the delimited output: a per-category
accuracy bar chart, a decoding-grid heatmap when grid cells are present, and
a pass@k curve when pass@k values are present.  Everything uses the Agg
backend so rendering works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .report import EvalReport
from .tasks import CATEGORIES


def render_category_accuracy(report: EvalReport, out_path: str | Path) -> Path:
    """Horizontal bar chart of accuracy per category."""
    ordered = [c for c in CATEGORIES if c in report.per_category]
    ordered += [c for c in sorted(report.per_category) if c not in CATEGORIES]
    names = ordered or ["overall"]
    values = (
        [report.per_category[c].accuracy for c in ordered]
        if ordered
        else [report.overall.accuracy]
    )
    fig, ax = plt.subplots(figsize=(7, 0.6 * len(names) + 1.5))
    bars = ax.barh(range(len(names)), values, color="#4878a8")
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names)
    ax.invert_yaxis()
    ax.set_xlabel("Accuracy (%)")
    ax.set_xlim(0, 100)
    for bar, value in zip(bars, values):
        ax.text(value + 1, bar.get_y() + bar.get_height() / 2, f"{value:.2f}", va="center", fontsize=9)
    ax.set_title("Accuracy by category")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_grid_heatmap(report: EvalReport, out_path: str | Path) -> Path:
    """Accuracy heatmap over the (temperature, top_p) grid."""
    if not report.per_cell:
        raise ValueError("report has no grid cells to render")
    temperatures = sorted({t for t, _ in report.per_cell})
    top_ps = sorted({p for _, p in report.per_cell})
    grid = [
        [report.per_cell.get((t, p)).accuracy if (t, p) in report.per_cell else float("nan") for p in top_ps]
        for t in temperatures
    ]
    fig, ax = plt.subplots(figsize=(1.6 * len(top_ps) + 2, 1.2 * len(temperatures) + 1.5))
    image = ax.imshow(grid, cmap="viridis", vmin=0, vmax=100, aspect="auto")
    ax.set_xticks(range(len(top_ps)), [str(p) for p in top_ps])
    ax.set_yticks(range(len(temperatures)), [str(t) for t in temperatures])
    ax.set_xlabel("top_p")
    ax.set_ylabel("temperature")
    for i, t in enumerate(temperatures):
        for j, p in enumerate(top_ps):
            if (t, p) in report.per_cell:
                ax.text(j, i, f"{grid[i][j]:.2f}", ha="center", va="center", color="white", fontsize=9)
    fig.colorbar(image, ax=ax, label="Accuracy (%)")
    ax.set_title("Accuracy across decoding grid")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_pass_at_curve(report: EvalReport, out_path: str | Path) -> Path:
    """Pass@k versus k."""
    if not report.pass_at:
        raise ValueError("report has no pass@k values to render")
    ks = sorted(report.pass_at)
    values = [report.pass_at[k] for k in ks]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(ks, values, marker="o", color="#b05040")
    ax.set_xticks(ks)
    ax.set_xlabel("k")
    ax.set_ylabel("pass@k")
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.set_title("Pass@k")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_loss_curve(losses: list[float], out_path: str | Path) -> Path:
    """Training loss trace for toy runs."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(range(len(losses)), losses, color="#4878a8", linewidth=1.0)
    ax.set_xlabel("micro-batch")
    ax.set_ylabel("loss")
    ax.grid(True, alpha=0.3)
    ax.set_title("Training loss")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_report_figures(report: EvalReport, out_dir: str | Path) -> list[Path]:
    """Write every figure the report supports; returns the created paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if report.per_category or not report.per_cell:
        written.append(render_category_accuracy(report, out_dir / "category_accuracy.png"))
    if report.per_cell:
        written.append(render_grid_heatmap(report, out_dir / "grid_accuracy.png"))
    if report.pass_at:
        written.append(render_pass_at_curve(report, out_dir / "pass_at.png"))
    return written
