"""Figure rendering for training curves and evaluation reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import LABEL_NAMES, ConfusionMatrix, MetricsReport

# Fixed metadata keeps PNG output byte-stable across runs.
_PNG_META = {"Software": "epag"}


def save_training_curves(history, path) -> None:
    """Loss and train-accuracy curves over epochs."""
    epochs = [h.epoch for h in history]
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_loss.plot(epochs, [h.mean_loss for h in history], marker="o", color="tab:blue")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("mean loss")
    ax_loss.grid(alpha=0.3)
    ax_acc.plot(epochs, [h.accuracy for h in history], marker="o", color="tab:green")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("train accuracy")
    ax_acc.set_ylim(0.0, 1.05)
    ax_acc.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)


def save_confusion_heatmap(cm: ConfusionMatrix, path) -> None:
    arr = cm.array
    fig, ax = plt.subplots(figsize=(5, 4.5))
    im = ax.imshow(arr, cmap="Blues")
    ax.set_xticks(range(len(LABEL_NAMES)), LABEL_NAMES, rotation=45, ha="right")
    ax.set_yticks(range(len(LABEL_NAMES)), LABEL_NAMES)
    ax.set_xlabel("predicted")
    ax.set_ylabel("gold")
    threshold = arr.max() / 2 if arr.max() else 0.5
    for i in range(arr.shape[0]):
        for j in range(arr.shape[1]):
            color = "white" if arr[i, j] > threshold else "black"
            ax.text(j, i, str(arr[i, j]), ha="center", va="center", color=color)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)


def save_per_class_bars(report: MetricsReport, path) -> None:
    x = np.arange(len(LABEL_NAMES))
    width = 0.27
    fig, ax = plt.subplots(figsize=(7, 3.8))
    ax.bar(x - width, report.precision, width, label="precision")
    ax.bar(x, report.recall, width, label="recall")
    ax.bar(x + width, report.f1, width, label="F1")
    ax.set_xticks(x, LABEL_NAMES, rotation=30, ha="right")
    ax.set_ylim(0.0, 1.05)
    ax.axhline(report.macro_f1, color="gray", linestyle="--", linewidth=1,
               label=f"macro F1 = {report.macro_f1:.3f}")
    ax.legend(fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)
