"""Rendering of Monte Carlo reports: text tables, CSV, and figures.

The text table and CSV carry the four confusion matrices (one per
feasibility test plus the combined revolute gate); the figures add
annotated heatmaps of the same counts and a bar chart of how many
factorization solves the gated classifier avoided. matplotlib is
imported lazily with the Agg backend so headless runs and non-plotting
callers never pay for it.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .montecarlo import ConfusionMatrix, McReport

CSV_HEADER = ("test", "tp", "fp", "fn", "tn")


def _matrix_rows(report: McReport) -> list[tuple[str, ConfusionMatrix]]:
    return [
        ("prismatic", report.prismatic),
        ("revolute_linear", report.revolute_linear),
        ("revolute_nonlinear", report.revolute_nonlinear),
        ("revolute_combined", report.revolute_combined),
    ]


def format_text_table(report: McReport) -> str:
    """Plain-text summary of a batch run, one confusion matrix per line."""

    cfg = report.config
    lines = [
        f"series: {cfg.n_series}  links: {cfg.n_links}  observations: {cfg.n_obs}"
        f"  master seed: {cfg.master_seed}",
        "",
        f"{'test':<20} {'tp':>6} {'fp':>6} {'fn':>6} {'tn':>6} {'inconclusive':>13}",
    ]
    for name, matrix in _matrix_rows(report):
        tp, fp, fn, tn = matrix.as_counts()
        lines.append(
            f"{name:<20} {tp:>6} {fp:>6} {fn:>6} {tn:>6} {matrix.inconclusive:>13}"
        )
    lines += [
        "",
        f"recovered structures: {report.recovered_series}/{cfg.n_series}"
        f"  (ambiguous: {report.ambiguous_series})",
        f"gated factorization solves: {report.gated_nonlinear_calls}"
        f" of {report.gated_linear_feasible} position-feasible pairs",
        f"timing: all-tests {report.all_tests_seconds:.1f}s,"
        f" gated {report.gated_seconds:.1f}s",
        f"digest: {report.digest()}",
    ]
    return "\n".join(lines) + "\n"


def write_csv(report: McReport, path) -> None:
    """Write the four confusion matrices as ``test,tp,fp,fn,tn`` rows."""

    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_HEADER)
        for name, matrix in _matrix_rows(report):
            writer.writerow((name, *matrix.as_counts()))


def render_figures(report: McReport, directory) -> list[Path]:
    """Render confusion-matrix heatmaps and the gating-economy bar chart.

    Returns the paths of the written PNG files.
    """

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []

    fig, axes = plt.subplots(2, 2, figsize=(8, 7))
    for ax, (name, matrix) in zip(axes.flat, _matrix_rows(report)):
        counts = [[matrix.tp, matrix.fn], [matrix.fp, matrix.tn]]
        ax.imshow(counts, cmap="Blues", vmin=0)
        for row in range(2):
            for col in range(2):
                ax.text(col, row, str(counts[row][col]), ha="center", va="center")
        ax.set_xticks([0, 1], ["positive", "negative"])
        ax.set_yticks([0, 1], ["actual +", "actual -"])
        ax.set_xlabel("predicted")
        title = name.replace("_", " ")
        if matrix.inconclusive:
            title += f" ({matrix.inconclusive} inconclusive)"
        ax.set_title(title)
    fig.suptitle(
        f"{report.config.n_series} series x {report.config.n_links} links,"
        f" {report.config.n_obs} observations"
    )
    fig.tight_layout()
    matrices_path = directory / "confusion_matrices.png"
    fig.savefig(matrices_path, dpi=150)
    plt.close(fig)
    written.append(matrices_path)

    fig, ax = plt.subplots(figsize=(6, 4))
    assessed = report.prismatic.total
    bars = [assessed, report.gated_linear_feasible, report.gated_nonlinear_calls]
    labels = ["triplets assessed", "position-feasible", "factorizations solved"]
    ax.bar(labels, bars, color=["#bbccdd", "#7799bb", "#336699"])
    for x, value in enumerate(bars):
        ax.text(x, value, str(value), ha="center", va="bottom")
    ax.set_ylabel("count")
    ax.set_title("gated classification avoids most factorization solves")
    fig.tight_layout()
    economy_path = directory / "gating_economy.png"
    fig.savefig(economy_path, dpi=150)
    plt.close(fig)
    written.append(economy_path)

    return written
