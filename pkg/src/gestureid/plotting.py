"""Figure rendering for run reports (confusion matrices, LDA projections)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 7,
    "figure.dpi": 100,
    "savefig.dpi": 150,
}

# keeps PNG bytes stable across runs
_PNG_METADATA = {"Software": None}


def _save(fig, path):
    fig.savefig(path, format="png", bbox_inches="tight", metadata=_PNG_METADATA)
    plt.close(fig)


def plot_confusion(matrix, labels, path, title=None):
    matrix = np.asarray(matrix)
    with plt.rc_context(STYLE):
        size = 1.6 + 0.45 * len(labels)
        fig, ax = plt.subplots(figsize=(size, size))
        row = matrix.sum(axis=1, keepdims=True)
        frac = np.divide(matrix, row, out=np.zeros(matrix.shape), where=row > 0)
        ax.imshow(frac, cmap="Blues", vmin=0.0, vmax=1.0)
        for i in range(matrix.shape[0]):
            for j in range(matrix.shape[1]):
                if matrix[i, j]:
                    ax.text(j, i, str(matrix[i, j]), ha="center", va="center",
                            color="white" if frac[i, j] > 0.6 else "black", fontsize=7)
        ax.set_xticks(range(len(labels)))
        ax.set_yticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=90)
        ax.set_yticklabels(labels)
        ax.set_xlabel("predicted performer")
        ax.set_ylabel("true performer")
        if title:
            ax.set_title(title)
        _save(fig, path)


def plot_projection(points, performers, path, title=None):
    points = np.asarray(points, dtype=float)
    performers = np.asarray(performers)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 4.2))
        cmap = plt.get_cmap("tab10" if np.unique(performers).size <= 10 else "tab20")
        for i, who in enumerate(np.unique(performers)):
            sel = performers == who
            ax.scatter(points[sel, 0], points[sel, 1], s=6, alpha=0.7, color=cmap(i % cmap.N), label=str(who))
        ax.set_xlabel("canonical variable 1")
        ax.set_ylabel("canonical variable 2")
        ax.legend(markerscale=2, frameon=False, loc="best")
        if title:
            ax.set_title(title)
        _save(fig, path)


def plot_accuracy(table, path):
    """Grouped bars from ``{scenario: {classifier: accuracy}}``."""
    scenarios = list(table)
    names = sorted({c for row in table.values() for c in row})
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(1.5 + 1.2 * len(scenarios), 3.0))
        width = 0.8 / max(len(names), 1)
        x = np.arange(len(scenarios))
        for k, name in enumerate(names):
            vals = [100.0 * table[s].get(name, np.nan) for s in scenarios]
            ax.bar(x + (k - (len(names) - 1) / 2) * width, vals, width, label=name)
        ax.set_xticks(x)
        ax.set_xticklabels(scenarios)
        ax.set_ylim(0, 100)
        ax.set_ylabel("accuracy (%)")
        ax.legend(frameon=False, ncol=len(names))
        _save(fig, path)
