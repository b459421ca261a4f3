"""Chart output for experiment runs: SVG files with CSV data siblings.

Every function writes two artifacts sharing one stem: an SVG rendering
and a CSV holding exactly the plotted numbers, so figures stay diffable
and testable. SVG output omits timestamps and uses a fixed hash salt,
making reruns byte-identical for a given library version.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "aegislab"
matplotlib.rcParams["svg.fonttype"] = "none"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .importance import ImportanceResult  # noqa: E402
from .learners import TrainingCurves  # noqa: E402
from .mimicry import SweepPoint  # noqa: E402

_SCATTER_CAP = 3000  # per-class point budget keeps SVGs small


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.10g}"
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _save(fig, stem: Path) -> Path:
    svg = stem.with_suffix(".svg")
    svg.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(svg, format="svg", metadata={"Date": None})
    plt.close(fig)
    return svg


def _even_subsample(n: int, cap: int) -> np.ndarray:
    """Indices of at most ``cap`` evenly spaced rows out of ``n``."""
    if n <= cap:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, cap).round().astype(np.int64))


def scatter_features(table, x_name: str, y_name: str, out_stem: str | Path) -> list[Path]:
    """Two-feature scatter on symlog axes, one marker style per label."""
    stem = Path(out_stem)
    names = table.schema.encoded_names
    x = table.rows[:, names.index(x_name)]
    y = table.rows[:, names.index(y_name)]
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    rows: list[tuple] = []
    for value, color, marker, label in ((0, "tab:blue", "o", "benign"),
                                        (1, "tab:red", "^", "attack")):
        mask = table.labels == value
        keep = np.flatnonzero(mask)[_even_subsample(int(mask.sum()), _SCATTER_CAP)]
        ax.scatter(x[keep], y[keep], s=8, alpha=0.5, c=color, marker=marker,
                   label=label, linewidths=0)
        rows.extend((x[i], y[i], value) for i in keep)
    ax.set_xscale("symlog", linthresh=1.0)
    ax.set_yscale("symlog", linthresh=1.0)
    ax.set_xlabel(x_name)
    ax.set_ylabel(y_name)
    ax.legend(loc="upper right")
    fig.tight_layout()
    svg = _save(fig, stem)
    csv_path = stem.with_suffix(".csv")
    _write_csv(csv_path, (x_name, y_name, "label"), rows)
    return [svg, csv_path]


def bars_comparison(metric_names: Sequence[str],
                    series: Mapping[str, Sequence[float]],
                    out_stem: str | Path) -> list[Path]:
    """Grouped bars: one group per metric, one bar per named series."""
    stem = Path(out_stem)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    positions = np.arange(len(metric_names), dtype=np.float64)
    width = 0.8 / max(len(series), 1)
    rows: list[tuple] = []
    for j, (name, values) in enumerate(series.items()):
        offset = (j - (len(series) - 1) / 2.0) * width
        ax.bar(positions + offset, values, width=width, label=name)
        rows.extend((name, m, v) for m, v in zip(metric_names, values))
    ax.set_xticks(positions)
    ax.set_xticklabels(metric_names)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("value")
    ax.legend(loc="lower right")
    fig.tight_layout()
    svg = _save(fig, stem)
    csv_path = stem.with_suffix(".csv")
    _write_csv(csv_path, ("series", "metric", "value"), rows)
    return [svg, csv_path]


def bars_importance(result: ImportanceResult, top_n: int,
                    out_stem: str | Path) -> list[Path]:
    """Horizontal bars of the largest permutation-importance drops."""
    stem = Path(out_stem)
    top = result.top_k(top_n)
    names = [n for n, _ in top]
    drops = [d for _, d in top]
    fig, ax = plt.subplots(figsize=(6.0, 0.35 * len(top) + 1.2))
    pos = np.arange(len(top))[::-1]  # largest drop on top
    ax.barh(pos, drops, color="tab:orange")
    ax.set_yticks(pos)
    ax.set_yticklabels(names)
    ax.set_xlabel(f"{result.metric} drop (baseline {result.baseline:.4f})")
    fig.tight_layout()
    svg = _save(fig, stem)
    csv_path = stem.with_suffix(".csv")
    _write_csv(csv_path, ("rank", "column", "drop"),
               [(i + 1, n, d) for i, (n, d) in enumerate(top)])
    return [svg, csv_path]


def sweep_curve(points: Sequence[SweepPoint], out_stem: str | Path) -> list[Path]:
    """PR-AUC and recall against the number of clipped features."""
    stem = Path(out_stem)
    ks = [p.k for p in points]
    pr = [p.report.pr_auc for p in points]
    recall = [p.report.confusion.recall for p in points]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(ks, pr, marker="o", color="tab:blue", label="PR-AUC")
    ax.plot(ks, recall, marker="s", linestyle="--", color="tab:red",
            label="recall at threshold")
    ax.set_xticks(ks)
    ax.set_xlabel("clipped features k")
    ax.set_ylabel("value")
    ax.set_ylim(0.0, 1.05)
    ax.legend(loc="lower left")
    fig.tight_layout()
    svg = _save(fig, stem)
    csv_path = stem.with_suffix(".csv")
    _write_csv(csv_path, ("k", "pr_auc", "roc_auc", "recall"),
               [(p.k, p.report.pr_auc, p.report.roc_auc,
                 p.report.confusion.recall) for p in points])
    return [svg, csv_path]


def confusion_heatmap(matrix: np.ndarray, class_names: Sequence[str],
                      out_stem: str | Path) -> list[Path]:
    """Count heat map; rows are true classes, columns predictions."""
    stem = Path(out_stem)
    counts = np.asarray(matrix, dtype=np.int64)
    side = 0.6 * len(class_names) + 2.0
    fig, ax = plt.subplots(figsize=(side, side * 0.85))
    ax.imshow(counts, cmap="Blues")
    ax.set_xticks(range(len(class_names)))
    ax.set_xticklabels(class_names)
    ax.set_yticks(range(len(class_names)))
    ax.set_yticklabels(class_names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    threshold = counts.max() / 2.0 if counts.size else 0.0
    for i in range(counts.shape[0]):
        for j in range(counts.shape[1]):
            ax.text(j, i, str(int(counts[i, j])), ha="center", va="center",
                    fontsize=8,
                    color="white" if counts[i, j] > threshold else "black")
    fig.tight_layout()
    svg = _save(fig, stem)
    csv_path = stem.with_suffix(".csv")
    _write_csv(csv_path, ("true", *class_names),
               [(name, *counts[i]) for i, name in enumerate(class_names)])
    return [svg, csv_path]


def epoch_curves(curves: TrainingCurves, out_stem: str | Path) -> list[Path]:
    """Accuracy and loss per epoch, train against validation."""
    stem = Path(out_stem)
    epochs = np.arange(1, len(curves.train_loss) + 1)
    has_val = bool(curves.val_loss)
    fig, (ax_acc, ax_loss) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    ax_acc.plot(epochs, curves.train_accuracy, color="tab:blue", label="train")
    if has_val:
        ax_acc.plot(epochs, curves.val_accuracy, color="tab:orange",
                    linestyle="--", label="validation")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy")
    ax_acc.legend(loc="lower right")
    ax_loss.plot(epochs, curves.train_loss, color="tab:blue", label="train")
    if has_val:
        ax_loss.plot(epochs, curves.val_loss, color="tab:orange",
                     linestyle="--", label="validation")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("cross-entropy loss")
    ax_loss.legend(loc="upper right")
    fig.tight_layout()
    svg = _save(fig, stem)
    csv_path = stem.with_suffix(".csv")
    rows = []
    for i, epoch in enumerate(epochs):
        row = [int(epoch), curves.train_loss[i], curves.train_accuracy[i]]
        row.extend([curves.val_loss[i], curves.val_accuracy[i]] if has_val
                   else ["", ""])
        rows.append(tuple(row))
    _write_csv(csv_path,
               ("epoch", "train_loss", "train_accuracy", "val_loss",
                "val_accuracy"), rows)
    return [svg, csv_path]


def snr_plot(snr: np.ndarray, marked: Sequence[int],
             out_stem: str | Path) -> list[Path]:
    """Per-sample SNR line with the detected points of interest marked."""
    stem = Path(out_stem)
    snr = np.asarray(snr, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.plot(np.arange(snr.size), snr, color="tab:blue", linewidth=1.0)
    marked = sorted(int(m) for m in marked)
    if marked:
        ax.plot(marked, snr[marked], linestyle="", marker="v",
                color="tab:red", label="detected POI")
        ax.legend(loc="upper right")
    ax.set_xlabel("sample index")
    ax.set_ylabel("SNR")
    fig.tight_layout()
    svg = _save(fig, stem)
    csv_path = stem.with_suffix(".csv")
    _write_csv(csv_path, ("sample_index", "snr"),
               [(int(i), float(v)) for i, v in enumerate(snr)])
    return [svg, csv_path]
