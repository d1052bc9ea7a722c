"""Figures written next to the CSV reports."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

TERM_COLORS = {"L1": "tab:blue", "L2": "tab:orange", "L3": "tab:green", "L4": "tab:red", "total": "black"}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_pretrain_losses(history, path, title="Pre-training losses"):
    fig, ax = plt.subplots(figsize=(6, 4))
    epochs = [row["epoch"] for row in history]
    for term, color in TERM_COLORS.items():
        values = [row[term] for row in history]
        if any(values):
            ax.plot(epochs, values, label=term, color=color, lw=2 if term == "total" else 1)
    if history and "validation" in history[0]:
        ax.plot(epochs, [row["validation"] for row in history], "k--", lw=1, label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss")
    ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    _save(fig, path)


def plot_kt_curves(logs, path):
    """``logs`` maps a label to a list of per-epoch rows."""
    fig, (ax_loss, ax_auc) = plt.subplots(1, 2, figsize=(10, 4))
    for label, rows in logs.items():
        epochs = [r["epoch"] for r in rows]
        ax_loss.plot(epochs, [r["train_loss"] for r in rows], label=label)
        ax_auc.plot(epochs, [r["val_auc"] for r in rows], label=label)
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("train cross-entropy")
    ax_auc.set_xlabel("epoch")
    ax_auc.set_ylabel("validation AUC")
    ax_auc.legend(frameon=False, fontsize=8)
    _save(fig, path)


def plot_auc_by_arm(reports, path):
    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(reports)), 4))
    names = list(reports)
    for x, name in enumerate(names):
        aucs = [r.auc for r in reports[name].runs]
        ax.scatter(np.full(len(aucs), x), aucs, color="gray", s=12, zorder=3)
        ax.bar(x, reports[name].mean_auc, color="tab:blue", alpha=0.6)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylabel("test AUC")
    lo = min(min(r.auc for r in rep.runs) for rep in reports.values())
    ax.set_ylim(max(0.0, lo - 0.05), 1.0)
    _save(fig, path)


def plot_roc(scores, labels, path):
    scores = np.asarray(scores)
    labels = np.asarray(labels)
    order = np.argsort(-scores, kind="stable")
    y = labels[order]
    tpr = np.concatenate([[0.0], np.cumsum(y) / max(y.sum(), 1)])
    fpr = np.concatenate([[0.0], np.cumsum(1 - y) / max((1 - y).sum(), 1)])
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.plot(fpr, tpr, color="tab:blue")
    ax.plot([0, 1], [0, 1], ":", color="gray")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    _save(fig, path)
