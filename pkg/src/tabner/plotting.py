"""Figures for run records, trend comparisons and the context probe."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .table import TAG_ORDER  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 3.7),
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "font.size": 10,
    "axes.labelsize": 10,
    "axes.titlesize": 11,
    "legend.fontsize": 8,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.4,
}
# PNG metadata without version strings keeps repeated runs byte-identical
_META = {"Software": None}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def plot_curves(series: dict, ylabel: str, path, title=None):
    """One line per label; ``series`` maps label -> (epochs, values)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, (x, y) in series.items():
            ax.plot(x, y, marker="o", markersize=2.5, label=label)
        ax.set_xlabel("epoch")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend(frameon=False)
        return _save(fig, path)


def plot_run(run, out_dir) -> list[Path]:
    out = Path(out_dir)
    loss = {f"fold {r.fold}": ([e.epoch for e in r.trace], [e.train_loss for e in r.trace])
            for r in run.folds}
    f1 = {f"fold {r.fold}": ([e.epoch for e in r.trace], [e.valid_f1 for e in r.trace])
          for r in run.folds}
    mode = run.config.get("attention_mode", "")
    aug = run.config.get("aug_mode", "")
    return [plot_curves(loss, "train loss", out / "loss.png", f"{mode} / {aug}"),
            plot_curves(f1, "validation micro F1", out / "valid_f1.png", f"{mode} / {aug}")]


def plot_probe(report, path):
    """Grouped bars of the five logits of the probed token in both tables."""
    labels = [t.value for t in TAG_ORDER]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        width = 0.38
        for k, (tid, z) in enumerate(zip(report.tables, report.logits)):
            xs = [i + (k - 0.5) * width for i in range(len(labels))]
            ax.bar(xs, z, width=width, label=tid)
        ax.axhline(0.0, color="0.3", linewidth=0.6)
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels)
        ax.set_ylabel(f"logit of {report.target!r}")
        ax.legend(frameon=False)
        return _save(fig, path)
