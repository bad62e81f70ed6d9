"""Command-line front end: ``generate``, ``convert``, ``run`` and ``project``.

Exit codes: 0 success, 2 usage/configuration, 3 data, 4 numerical failure.
"""

import argparse
import configparser
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import classifiers as clf
from .dataset import (DEFAULT_CONVERT_PATTERN, PROFILES, SyntheticSpec, convert_directory,
                      generate_synthetic, load_corpus, save_corpus)
from .errors import ConfigError, DataError, GestureIdError, NumericalError
from .evaluation import (CLASSIFIERS, KNN_GRID, LDA_GRID, SVM_VALUES, CvSpec, GridSpec, ScenarioSpec,
                         prepare, run_prepared, summarize_scenario_a)
from .preprocess import LAYOUTS, preprocess_corpus
from .report import _csv_text, write_atomic, write_manifest, write_run_outputs

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

log = logging.getLogger("gestureid")


# ---------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    corpus: Optional[str] = None
    out: Optional[str] = None
    scenarios: list = field(default_factory=lambda: ["b"])
    classifiers: list = field(default_factory=lambda: list(CLASSIFIERS))
    mode: str = "paper_faithful"
    seed: int = 0
    components: int = 100
    length: int = 100
    outer_folds: int = 4
    inner_folds: int = 4
    train_gestures: Optional[list] = None
    test_gestures: Optional[list] = None
    layout: str = "time_major"
    lda_d: list = field(default_factory=lambda: list(LDA_GRID))
    knn_k: list = field(default_factory=lambda: list(KNN_GRID))
    svm_c: list = field(default_factory=lambda: list(SVM_VALUES))
    svm_gamma: list = field(default_factory=lambda: list(SVM_VALUES))
    figures: bool = True

    def validate(self):
        if not self.corpus:
            raise ConfigError("corpus: a corpus directory is required")
        if not Path(self.corpus).is_dir():
            raise ConfigError(f"corpus: {self.corpus!r} is not a directory")
        if not self.out:
            raise ConfigError("out: an output directory is required")
        self.mode = self.mode.replace("-", "_")
        if self.mode not in ("paper_faithful", "fold_safe"):
            raise ConfigError(f"mode: expected paper_faithful or fold_safe, got {self.mode!r}")
        if self.layout not in LAYOUTS:
            raise ConfigError(f"layout: expected one of {LAYOUTS}, got {self.layout!r}")
        for key in ("components", "length", "outer_folds", "inner_folds"):
            if getattr(self, key) < (2 if key != "components" else 1):
                raise ConfigError(f"{key}: value {getattr(self, key)} is too small")
        bad = [c for c in self.classifiers if c not in CLASSIFIERS]
        if bad or not self.classifiers:
            raise ConfigError(f"classifiers: unknown or empty {bad or self.classifiers}")
        for key in ("lda_d", "knn_k", "svm_c", "svm_gamma"):
            vals = getattr(self, key)
            if not vals or any(v <= 0 for v in vals):
                raise ConfigError(f"{key}: values must be positive and non-empty")
        for s in self.scenarios:
            _scenario_token(s)
        return self

    def grids(self):
        make = {
            "lda": lambda: GridSpec.lda(self.lda_d),
            "knn": lambda: GridSpec.knn(self.knn_k),
            "svm": lambda: GridSpec.svm(self.svm_c, self.svm_gamma),
        }
        return [make[c]() for c in self.classifiers]

    def cv(self):
        return CvSpec(self.outer_folds, self.inner_folds, self.seed, self.mode)


_INT_KEYS = {"seed", "components", "length", "outer_folds", "inner_folds"}
_INT_LIST_KEYS = {"lda_d", "knn_k", "train_gestures", "test_gestures"}
_FLOAT_LIST_KEYS = {"svm_c", "svm_gamma"}
_STR_LIST_KEYS = {"scenarios", "classifiers"}


def _parse_int_list(text):
    out = []
    for part in str(text).replace(" ", "").split(","):
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _coerce(key, value):
    """Turn a config value (string from a flat file, or JSON value) into the field's type."""
    try:
        if value is None:
            return None
        if key in _INT_KEYS:
            return int(value)
        if key in _INT_LIST_KEYS:
            return [int(v) for v in value] if isinstance(value, list) else _parse_int_list(value)
        if key in _FLOAT_LIST_KEYS:
            return [float(v) for v in value] if isinstance(value, list) else [
                float(v) for v in str(value).split(",") if v.strip()]
        if key in _STR_LIST_KEYS:
            return [str(v) for v in value] if isinstance(value, list) else [
                v.strip().lower() for v in str(value).split(",") if v.strip()]
        if key == "figures":
            if isinstance(value, bool):
                return value
            if str(value).lower() in ("1", "true", "yes", "on"):
                return True
            if str(value).lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {value!r}")
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}") from None


def read_config_file(path):
    """Flat ``key = value`` text, or JSON (a run manifest's ``config`` block or a flat object)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON in {path}: {exc}") from None
        raw = doc.get("config", doc)
    else:
        parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            parser.read_string("[run]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(f"config: cannot parse {path}: {exc}") from None
        raw = dict(parser["run"])
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for key, value in raw.items():
        key = key.strip().replace("-", "_")
        if key not in known:
            raise ConfigError(f"{key}: unknown configuration key")
        values[key] = _coerce(key, value)
    return values


def _scenario_token(token):
    token = token.strip().lower()
    if token in ("a", "b", "c"):
        return token, None
    if token.startswith("a:"):
        try:
            return "a", int(token[2:])
        except ValueError:
            raise ConfigError(f"scenarios: bad gesture id in {token!r}") from None
    if token.startswith("c:"):
        try:
            train, test = token[2:].split("/")
            return "c", (_parse_int_list(train), _parse_int_list(test))
        except ValueError:
            raise ConfigError(f"scenarios: expected c:<train>/<test>, got {token!r}") from None
    raise ConfigError(f"scenarios: unknown scenario {token!r} (use a, a:<gesture>, b, c, c:<train>/<test>)")


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args):
    spec = SyntheticSpec(
        performer_count=args.performers,
        gesture_count=args.gestures,
        repetitions_per_pace={"natural": args.natural, "rapid": args.rapid, "slow": args.slow},
        sensor_count=args.sensors,
        style_separation=args.separation,
        noise_sigma=args.noise,
        seed=args.seed,
        shared_style=args.shared_style,
        rate_hz=args.rate,
    )
    corpus = generate_synthetic(spec)
    save_corpus(corpus, args.out)
    s = corpus.summary()
    print(f"wrote {args.out}: {s['performers']} performers, {s['gestures']} gestures, "
          f"{s['recordings']} recordings, {s['sensor_count']} sensors")
    return EXIT_OK


def cmd_convert(args):
    corpus = convert_directory(args.src, args.out, args.device, args.pattern)
    s = corpus.summary()
    print(f"wrote {args.out}: {s['performers']} performers, {s['gestures']} gestures, {s['recordings']} recordings")
    return EXIT_OK


def _build_run_config(args):
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    flag_map = {
        "corpus": args.corpus, "out": args.out, "mode": args.mode, "seed": args.seed,
        "components": args.components, "length": args.length, "outer_folds": args.outer_folds,
        "inner_folds": args.inner_folds, "layout": args.layout,
        "scenarios": args.scenario, "classifiers": args.classifier, "train_gestures": args.train_gestures,
        "test_gestures": args.test_gestures, "lda_d": args.lda_d, "knn_k": args.knn_k,
        "svm_c": args.svm_c, "svm_gamma": args.svm_gamma,
    }
    for key, value in flag_map.items():
        if value is not None:
            values[key] = _coerce(key, value)
    if args.no_figures:
        values["figures"] = False
    return RunConfig(**values).validate()


def execute_run(cfg):
    """Run every requested scenario and write the report artifacts into ``cfg.out``."""
    corpus = load_corpus(cfg.corpus)
    cv = cfg.cv()
    grids = cfg.grids()
    data = prepare(corpus, cv, cfg.components, cfg.length, cfg.layout)
    experiments = {}
    scenario_a = None
    for token in cfg.scenarios:
        kind, arg = _scenario_token(token)
        if kind == "a" and arg is None:
            reports = [run_prepared(data, ScenarioSpec("A", gesture_id=g), grids, cv) for g in corpus.gestures]
            experiments["A"] = reports
            scenario_a = summarize_scenario_a(reports)
        elif kind == "a":
            spec = ScenarioSpec("A", gesture_id=arg)
            experiments[spec.label] = [run_prepared(data, spec, grids, cv)]
        elif kind == "b":
            experiments["B"] = [run_prepared(data, ScenarioSpec("B"), grids, cv)]
        else:
            if arg is not None:
                spec = ScenarioSpec("C", train_gestures=arg[0], test_gestures=arg[1])
            else:
                spec = ScenarioSpec.scenario_c(corpus.gestures, cfg.train_gestures, cfg.test_gestures)
            experiments["C"] = [run_prepared(data, spec, grids, cv)]
        log.info("finished scenario %s", token)
    written = write_run_outputs(cfg.out, experiments, cfg.classifiers, scenario_a, cfg.figures)
    config = asdict(cfg)
    config["corpus"] = str(Path(cfg.corpus).resolve())
    config["out"] = str(Path(cfg.out).resolve())
    write_manifest(cfg.out, config, written)
    return experiments


def cmd_run(args):
    cfg = _build_run_config(args)
    execute_run(cfg)
    print((Path(cfg.out) / "summary.txt").read_text(encoding="utf-8"), end="")
    return EXIT_OK


def project_corpus(corpus, d=2, components=100, length=100, layout="time_major"):
    """Normalize, PCA-reduce and LDA-project a whole corpus; returns (n, d) points."""
    vectors, _ = preprocess_corpus(corpus, length, layout)
    X = np.array([v.values for v in vectors])
    y = np.array([v.performer_id for v in vectors])
    if np.unique(y).size < 2:
        raise DataError("need >= 2 classes (performers) for an LDA projection")
    n_comp = min(components, X.shape[0] - 1, X.shape[1])
    Z = clf.pca_fit(X, n_comp).transform(X)
    model = clf.lda_fit(Z, y, d="max")
    use = min(d, model.max_d)
    if use < d:
        log.warning("only %d canonical vector(s) available; padding with zeros", use)
    P = clf.lda_project(model.truncate(use), Z)
    if use < d:
        P = np.hstack([P, np.zeros((P.shape[0], d - use))])
    return P, y, np.array([v.gesture_id for v in vectors])


def cmd_project(args):
    corpus = load_corpus(args.corpus)
    P, performers, gestures = project_corpus(corpus, 2, args.components, args.length, args.layout)
    out = Path(args.out)
    rows = [["x", "y", "performer", "gesture"]]
    rows += [[repr(float(p[0])), repr(float(p[1])), w, int(g)] for p, w, g in zip(P, performers, gestures)]
    write_atomic(out / "projection.csv", _csv_text(rows))
    written = ["projection.csv"]
    if not args.no_figures:
        from .plotting import plot_projection

        plot_projection(P, performers, out / "projection.png", title="LDA projection (d = 2)")
        written.append("projection.png")
    config = {"corpus": str(Path(args.corpus).resolve()), "components": args.components,
              "length": args.length, "layout": args.layout, "d": 2}
    write_manifest(out, config, written, command="project")
    print(f"wrote {out / 'projection.csv'} ({len(P)} points)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {v}")
    return v


def _non_negative_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _non_negative_float(text):
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="gestureid", description="Performer identification from hand gestures.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic corpus")
    g.add_argument("--performers", type=_positive_int, default=4)
    g.add_argument("--gestures", type=_positive_int, default=22)
    g.add_argument("--sensors", type=_positive_int, default=10)
    g.add_argument("--natural", type=_non_negative_int, default=6, help="natural-pace repetitions")
    g.add_argument("--rapid", type=_non_negative_int, default=2)
    g.add_argument("--slow", type=_non_negative_int, default=2)
    g.add_argument("--separation", type=_non_negative_float, default=1.0, help="performer style amplitude")
    g.add_argument("--noise", type=_non_negative_float, default=0.5)
    g.add_argument("--shared-style", type=float, default=0.5,
                   help="fraction of style energy shared across a performer's gestures")
    g.add_argument("--rate", type=float, default=33.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("convert", help="convert per-recording text files to the corpus format")
    c.add_argument("--src", required=True)
    c.add_argument("--device", choices=sorted(PROFILES), required=True)
    c.add_argument("--pattern", default=DEFAULT_CONVERT_PATTERN,
                   help="regex over relative paths with groups performer, gesture and optional rep/pace")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_convert)

    r = sub.add_parser("run", help="nested cross-validation experiment")
    r.add_argument("--config", help="flat key = value file or a previous run's manifest.json")
    r.add_argument("--corpus")
    r.add_argument("--out")
    r.add_argument("--scenario", help="comma list of a, a:<gesture>, b, c, c:<train>/<test>")
    r.add_argument("--classifier", help="comma list of lda, knn, svm")
    r.add_argument("--mode", choices=["paper-faithful", "fold-safe", "paper_faithful", "fold_safe"])
    r.add_argument("--seed", type=int)
    r.add_argument("--components", type=int, help="PCA components (default 100)")
    r.add_argument("--length", type=int, help="resampled length (default 100)")
    r.add_argument("--outer-folds", type=int)
    r.add_argument("--inner-folds", type=int)
    r.add_argument("--layout", choices=LAYOUTS)
    r.add_argument("--train-gestures", help="scenario C training gestures, e.g. 1-11")
    r.add_argument("--test-gestures", help="scenario C test gestures, e.g. 12-22")
    r.add_argument("--lda-d", help="comma list of LDA dimensions")
    r.add_argument("--knn-k", help="comma list of neighbour counts")
    r.add_argument("--svm-c", help="comma list of C values")
    r.add_argument("--svm-gamma", help="comma list of RBF gamma values")
    r.add_argument("--no-figures", action="store_true")
    r.set_defaults(func=cmd_run)

    pr = sub.add_parser("project", help="LDA d=2 scatter data for the whole corpus")
    pr.add_argument("--corpus", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--components", type=_positive_int, default=100)
    pr.add_argument("--length", type=_positive_int, default=100)
    pr.add_argument("--layout", choices=LAYOUTS, default="time_major")
    pr.add_argument("--no-figures", action="store_true")
    pr.set_defaults(func=cmd_project)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except GestureIdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
