"""Writing run artifacts: summary table, confusion CSVs, figures and the manifest."""

import csv
import hashlib
import io
import json
import os
import platform
import tempfile
from pathlib import Path

import numpy as np

DISPLAY_NAMES = {"lda": "LDA", "knn": "k-NN", "svm": "SVC"}


def write_atomic(path, data):
    """Write text or bytes to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": "\n"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(rows):
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def confusion_csv(labels, matrix):
    rows = [["true\\predicted"] + list(labels)]
    rows += [[lab] + [int(v) for v in row] for lab, row in zip(labels, np.asarray(matrix))]
    return _csv_text(rows)


def read_confusion_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    labels = rows[0][1:]
    return labels, np.array([[int(v) for v in r[1:]] for r in rows[1:]], dtype=np.int64)


def summary_text(table, classifiers):
    """Accuracy table in percent, one row per scenario, one column per classifier."""
    head = ["Scenario"] + [DISPLAY_NAMES.get(c, c) for c in classifiers]
    lines = ["Classification accuracy (%)", ""]
    widths = [max(8, len(h)) for h in head]
    lines.append("  ".join(h.ljust(w) for h, w in zip(head, widths)))
    lines.append("  ".join("-" * w for w in widths))
    for scen, row in table.items():
        cells = [scen] + [f"{100 * row[c]:.1f}" if c in row else "-" for c in classifiers]
        lines.append("  ".join(v.ljust(w) for v, w in zip(cells, widths)))
    return "\n".join(lines) + "\n"


def sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions():
    import matplotlib
    import numba
    import scipy

    from . import __version__

    return {
        "gestureid": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "matplotlib": matplotlib.__version__,
    }


def write_run_outputs(out_dir, experiments, classifiers, scenario_a=None, figures=True):
    """Write every report artifact for a finished run; returns written file names.

    ``experiments`` maps a scenario row label ("A", "A5", "B", "C") to a list
    of ExperimentReports (several for the all-gestures scenario A, whose
    confusion matrices are summed and whose accuracy is the per-gesture mean).
    """
    from .plotting import plot_accuracy, plot_confusion

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    table = {}
    summary_rows = [["scenario", "classifier", "accuracy", "mean_fold_accuracy", "chosen_params"]]
    for row_label, reports in experiments.items():
        table[row_label] = {}
        for name in classifiers:
            res = [r.results[name] for r in reports if name in r.results]
            if not res:
                continue
            labels = res[0].labels
            confusion = sum(r.confusion for r in res)
            if len(res) == 1:
                acc = res[0].accuracy
                fold_acc = res[0].mean_fold_accuracy
            else:
                acc = float(np.mean([r.accuracy for r in res]))
                fold_acc = float(np.mean([r.mean_fold_accuracy for r in res]))
            table[row_label][name] = acc
            params = [p for r in res for p in r.chosen_params]
            summary_rows.append([row_label, name, repr(acc), repr(fold_acc), json.dumps(params, sort_keys=True)])
            fname = f"confusion_{row_label}_{name}.csv"
            write_atomic(out / fname, confusion_csv(labels, confusion))
            written.append(fname)
            if figures:
                png = f"confusion_{row_label}_{name}.png"
                plot_confusion(confusion, labels, out / png,
                               title=f"Scenario {row_label}, {DISPLAY_NAMES.get(name, name)}")
                written.append(png)

    write_atomic(out / "summary.txt", summary_text(table, classifiers))
    write_atomic(out / "summary.csv", _csv_text(summary_rows))
    written += ["summary.txt", "summary.csv"]

    if scenario_a:
        rows = [["gesture"] + list(classifiers)]
        gestures = sorted({g for v in scenario_a.values() for g in v["per_gesture"]})
        for g in gestures:
            rows.append([g] + [repr(scenario_a[c]["per_gesture"].get(g, float("nan"))) for c in classifiers
                               if c in scenario_a])
        rows.append(["mean"] + [repr(scenario_a[c]["mean"]) for c in classifiers if c in scenario_a])
        write_atomic(out / "scenario_a_per_gesture.csv", _csv_text(rows))
        written.append("scenario_a_per_gesture.csv")

    detail = {label: [r.as_dict() for r in reports] for label, reports in experiments.items()}
    write_atomic(out / "report.json", json.dumps(detail, sort_keys=True) + "\n")
    written.append("report.json")

    if figures and table:
        plot_accuracy(table, out / "accuracy.png")
        written.append("accuracy.png")
    return written


def write_manifest(out_dir, config, written, command="run"):
    out = Path(out_dir)
    manifest = {
        "command": command,
        "config": config,
        "seed": config.get("seed"),
        "mode": config.get("mode"),
        "versions": versions(),
        "outputs": {name: sha256(out / name) for name in sorted(written)},
    }
    write_atomic(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
