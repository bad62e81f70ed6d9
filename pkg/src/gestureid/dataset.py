"""Recording/corpus data model, on-disk corpus format and synthetic corpora.

A corpus directory holds::

    device.csv    name,sensor_count,rate_hz (one data row)
    index.csv     file,performer,gesture,pace
    catalog.csv   gesture,name (optional)
    <file>.csv    t,s1,...,sm  (one row per time step)

Numbers are written with 17 significant digits so a save/load cycle is exact.
"""

import csv
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import CorpusFormatError, DataError

log = logging.getLogger(__name__)

PACES = ("natural", "rapid", "slow")

GESTURE_NAMES = {
    1: "A-OK",
    2: "Walking",
    3: "Cutting",
    4: "Shove away",
    5: "Point at self",
    6: "Thumbs up",
    7: "Crazy",
    8: "Knocking",
    9: "Cutthroat",
    10: "Money",
    11: "Thumbs down",
    12: "Doubting",
    13: "Continue",
    14: "Speaking",
    15: "Hello",
    16: "Grasping",
    17: "Scaling",
    18: "Rotating",
    19: "Come here",
    20: "Telephone",
    21: "Go away",
    22: "Relocate",
}


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    sensor_count: int
    rate_hz: float
    channels: tuple = ()

    def __post_init__(self):
        if int(self.sensor_count) < 1:
            raise DataError(f"sensor_count must be >= 1, got {self.sensor_count}")
        if not self.rate_hz > 0:
            raise DataError(f"rate_hz must be positive, got {self.rate_hz}")


DG5VHAND = DeviceProfile(
    "dg5vhand",
    10,
    33.0,
    channels=("bend_thumb", "bend_index", "bend_middle", "bend_ring", "bend_little",
              "acc_x", "acc_y", "acc_z", "roll", "pitch"),
)
CYBERGLOVE = DeviceProfile(
    "cyberglove",
    22,
    90.0,
    channels=tuple(f"bend{i}" for i in range(1, 16))
    + ("pos_x", "pos_y", "pos_z", "quat_w", "quat_x", "quat_y", "quat_z"),
)
PROFILES = {p.name: p for p in (DG5VHAND, CYBERGLOVE)}


class Recording:
    """One gesture performance: an m x T sample matrix plus labels.

    Arrays are copied and frozen on construction.
    """

    __slots__ = ("samples", "timestamps", "performer_id", "gesture_id", "pace")

    def __init__(self, samples, timestamps, performer_id, gesture_id, pace="natural"):
        samples = np.array(samples, dtype=float, copy=True)
        timestamps = np.array(timestamps, dtype=float, copy=True)
        if samples.ndim != 2:
            raise DataError(f"samples must be a 2-D (sensors x time) matrix, got shape {samples.shape}")
        if timestamps.ndim != 1 or timestamps.shape[0] != samples.shape[1]:
            raise DataError(
                f"timestamps length {timestamps.shape} does not match {samples.shape[1]} time steps"
            )
        if samples.shape[1] < 2:
            raise DataError("a recording needs at least 2 time steps")
        if not np.all(np.diff(timestamps) > 0):
            raise DataError("timestamps must be strictly increasing")
        if pace not in PACES:
            raise DataError(f"unknown pace {pace!r}; expected one of {PACES}")
        samples.setflags(write=False)
        timestamps.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "performer_id", str(performer_id))
        object.__setattr__(self, "gesture_id", int(gesture_id))
        object.__setattr__(self, "pace", pace)

    def __setattr__(self, name, value):
        raise AttributeError("Recording is immutable")

    @property
    def sensor_count(self):
        return self.samples.shape[0]

    @property
    def length(self):
        return self.samples.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Recording):
            return NotImplemented
        return (
            self.performer_id == other.performer_id
            and self.gesture_id == other.gesture_id
            and self.pace == other.pace
            and np.array_equal(self.samples, other.samples)
            and np.array_equal(self.timestamps, other.timestamps)
        )

    def __repr__(self):
        return (
            f"Recording(performer={self.performer_id!r}, gesture={self.gesture_id}, "
            f"pace={self.pace!r}, shape={self.samples.shape})"
        )


@dataclass(frozen=True, eq=True)
class Corpus:
    device: DeviceProfile
    recordings: tuple
    gesture_catalog: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "recordings", tuple(self.recordings))
        object.__setattr__(self, "gesture_catalog", {int(k): str(v) for k, v in self.gesture_catalog.items()})
        m = self.device.sensor_count
        for i, rec in enumerate(self.recordings):
            if rec.sensor_count != m:
                raise DataError(
                    f"recording {i}: sensor count mismatch ({rec.sensor_count} rows, "
                    f"device {self.device.name!r} has {m})"
                )

    def __len__(self):
        return len(self.recordings)

    @property
    def performers(self):
        return sorted({r.performer_id for r in self.recordings})

    @property
    def gestures(self):
        return sorted({r.gesture_id for r in self.recordings})

    def subset(self, keep):
        return Corpus(self.device, [r for r in self.recordings if keep(r)], self.gesture_catalog)

    def summary(self):
        return {
            "device": self.device.name,
            "sensor_count": self.device.sensor_count,
            "performers": len(self.performers),
            "gestures": len(self.gestures),
            "recordings": len(self.recordings),
        }


# ---------------------------------------------------------------------------
# on-disk format


def _fmt(x):
    return "%.17g" % x


def save_corpus(corpus, path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    dev = corpus.device
    with open(path / "device.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "sensor_count", "rate_hz"])
        w.writerow([dev.name, dev.sensor_count, _fmt(dev.rate_hz)])
    if corpus.gesture_catalog:
        with open(path / "catalog.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["gesture", "name"])
            for gid in sorted(corpus.gesture_catalog):
                w.writerow([gid, corpus.gesture_catalog[gid]])

    width = len(str(max(len(corpus.recordings) - 1, 0)))
    width = max(width, 5)
    header = ",".join(["t"] + [f"s{i}" for i in range(1, dev.sensor_count + 1)]) + "\n"
    rows = []
    for i, rec in enumerate(corpus.recordings):
        safe = re.sub(r"[^A-Za-z0-9]+", "-", rec.performer_id).strip("-") or "x"
        fname = f"{i:0{width}d}_{safe}_g{rec.gesture_id:02d}_{rec.pace}.csv"
        rows.append((fname, rec.performer_id, rec.gesture_id, rec.pace))
        table = np.column_stack([rec.timestamps, rec.samples.T])
        lines = [",".join(_fmt(v) for v in row) for row in table.tolist()]
        with open(path / fname, "w", newline="", encoding="utf-8") as fh:
            fh.write(header)
            fh.write("\n".join(lines))
            fh.write("\n")
    with open(path / "index.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["file", "performer", "gesture", "pace"])
        w.writerows(rows)


def _read_device(path):
    fpath = path / "device.csv"
    if not fpath.exists():
        raise CorpusFormatError("missing device file", fpath)
    with open(fpath, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or rows[0] != ["name", "sensor_count", "rate_hz"]:
        raise CorpusFormatError("expected header name,sensor_count,rate_hz and one data row", fpath, 1)
    try:
        name, m, rate = rows[1]
        return DeviceProfile(name, int(m), float(rate), PROFILES[name].channels if name in PROFILES else ())
    except (ValueError, DataError) as exc:
        raise CorpusFormatError(f"bad device row: {exc}", fpath, 2) from None


def _read_recording_file(fpath, device, performer, gesture, pace):
    m = device.sensor_count
    with open(fpath, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CorpusFormatError("empty recording file", fpath, 1) from None
        has_time = bool(header) and header[0] == "t"
        n_sensor_cols = len(header) - (1 if has_time else 0)
        if n_sensor_cols != m:
            raise CorpusFormatError(
                f"sensor count mismatch: {n_sensor_cols} sensor columns, device {device.name!r} has {m}",
                fpath,
                1,
            )
        values = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CorpusFormatError(f"expected {len(header)} columns, got {len(row)}", fpath, lineno)
            try:
                values.append([float(v) for v in row])
            except ValueError as exc:
                raise CorpusFormatError(f"non-numeric value ({exc})", fpath, lineno) from None
    if len(values) < 2:
        raise CorpusFormatError("a recording needs at least 2 time steps", fpath)
    table = np.array(values, dtype=float)
    if has_time:
        ts = table[:, 0]
        bad = np.nonzero(np.diff(ts) <= 0)[0]
        if bad.size:
            raise CorpusFormatError("timestamps not strictly increasing", fpath, int(bad[0]) + 3)
        samples = table[:, 1:].T
    else:
        # no time column: uniform grid at the device's nominal rate
        ts = np.arange(table.shape[0]) / device.rate_hz
        samples = table.T
    return Recording(samples, ts, performer, gesture, pace)


def load_corpus(path):
    path = Path(path)
    if not path.is_dir():
        raise CorpusFormatError("corpus path is not a directory", path)
    device = _read_device(path)

    catalog = {}
    cpath = path / "catalog.csv"
    if cpath.exists():
        with open(cpath, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            next(reader, None)
            for lineno, row in enumerate(reader, start=2):
                if len(row) != 2:
                    raise CorpusFormatError("expected gesture,name", cpath, lineno)
                try:
                    catalog[int(row[0])] = row[1]
                except ValueError:
                    raise CorpusFormatError(f"bad gesture id {row[0]!r}", cpath, lineno) from None

    ipath = path / "index.csv"
    if not ipath.exists():
        raise CorpusFormatError("missing index file", ipath)
    entries = []
    with open(ipath, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["file", "performer", "gesture", "pace"]:
            raise CorpusFormatError("expected header file,performer,gesture,pace", ipath, 1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise CorpusFormatError(f"expected 4 fields, got {len(row)}", ipath, lineno)
            fname, performer, gesture, pace = row
            try:
                gesture = int(gesture)
            except ValueError:
                raise CorpusFormatError(f"bad gesture id {gesture!r}", ipath, lineno) from None
            if pace not in PACES:
                raise CorpusFormatError(f"unknown pace {pace!r}", ipath, lineno)
            if not (path / fname).exists():
                raise CorpusFormatError(f"referenced file {fname!r} does not exist", ipath, lineno)
            entries.append((fname, performer, gesture, pace))

    entries.sort(key=lambda e: e[0])
    recordings = [_read_recording_file(path / f, device, p, g, pace) for f, p, g, pace in entries]
    return Corpus(device, recordings, catalog)


# ---------------------------------------------------------------------------
# synthetic corpora


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape and difficulty of a synthetic corpus.

    ``style_separation`` is the RMS amplitude (per channel, in template units)
    of each performer's style offset. A fraction ``shared_style`` of that
    offset's energy is common to all of a performer's gestures; the remainder
    is specific to each (performer, gesture) pair, so it helps only when the
    test gesture was seen in training.
    """

    performer_count: int = 4
    gesture_count: int = 22
    repetitions_per_pace: Mapping[str, int] = field(
        default_factory=lambda: {"natural": 6, "rapid": 2, "slow": 2}
    )
    sensor_count: int = 10
    style_separation: float = 1.0
    noise_sigma: float = 0.5
    seed: int = 0
    shared_style: float = 0.5
    rate_hz: float = 33.0

    def __post_init__(self):
        for name in ("performer_count", "gesture_count", "sensor_count"):
            if int(getattr(self, name)) < 1:
                raise DataError(f"{name} must be a positive integer")
        if self.style_separation < 0:
            raise DataError("style_separation must be non-negative")
        if self.noise_sigma < 0:
            raise DataError("noise_sigma must be non-negative")
        if not 0.0 <= self.shared_style <= 1.0:
            raise DataError("shared_style must lie in [0, 1]")
        if not self.rate_hz > 0:
            raise DataError("rate_hz must be positive")
        for pace, n in self.repetitions_per_pace.items():
            if pace not in PACES:
                raise DataError(f"unknown pace {pace!r} in repetitions_per_pace")
            if int(n) < 0:
                raise DataError(f"repetitions_per_pace[{pace!r}] must be >= 0")

    @property
    def recordings_per_cell(self):
        return sum(int(n) for n in self.repetitions_per_pace.values())


_DURATION_RANGE = {"rapid": (50, 89), "natural": (90, 140), "slow": (141, 200)}
_FINE_GRID = np.linspace(0.0, 1.0, 513)


def _sinusoid_bank(rng, n_channels, freqs):
    """Per channel, 2-4 random-phase sinusoids; returns (amps, freqs, phases) arrays."""
    bank = []
    for _ in range(n_channels):
        k = int(rng.integers(2, 5))
        amps = rng.uniform(0.5, 1.5, size=k)
        fr = rng.choice(freqs, size=k)
        ph = rng.uniform(0.0, 2 * np.pi, size=k)
        bank.append((amps, fr, ph))
    return bank


def _evaluate_bank(bank, u, unit_rms=False):
    out = np.empty((len(bank), u.size))
    for c, (amps, fr, ph) in enumerate(bank):
        row = (amps[:, None] * np.sin(2 * np.pi * fr[:, None] * u[None, :] + ph[:, None])).sum(axis=0)
        if unit_rms:
            fine = (amps[:, None] * np.sin(2 * np.pi * fr[:, None] * _FINE_GRID[None, :] + ph[:, None])).sum(axis=0)
            rms = math.sqrt(float(np.mean(fine**2)))
            row = row / rms if rms > 0 else row
        out[c] = row
    return out


def generate_synthetic(spec):
    """Build a corpus with the IITiS repetition structure from ``spec``.

    Every random component draws from its own stream keyed on the seed and the
    component's coordinates, so durations depend only on (gesture, pace,
    repetition) and a recording never depends on generation order.
    """
    m = int(spec.sensor_count)
    device = DeviceProfile("synthetic", m, float(spec.rate_hz))
    seed = int(spec.seed)
    width = len(str(spec.performer_count))
    performers = [f"p{i:0{width}d}" for i in range(1, spec.performer_count + 1)]
    gestures = list(range(1, spec.gesture_count + 1))

    templates = {g: _sinusoid_bank(np.random.default_rng([seed, 0, g]), m, [1, 2, 3, 4]) for g in gestures}
    shared = {
        pi: _sinusoid_bank(np.random.default_rng([seed, 2, pi]), m, [0.5, 1.0, 1.5])
        for pi in range(len(performers))
    }
    w_shared = math.sqrt(spec.shared_style)
    w_specific = math.sqrt(1.0 - spec.shared_style)
    sep = float(spec.style_separation)

    recordings = []
    for pi, performer in enumerate(performers):
        for g in gestures:
            specific = _sinusoid_bank(np.random.default_rng([seed, 3, pi, g]), m, [0.5, 1.0, 1.5, 2.0])
            for pace_idx, pace in enumerate(PACES):
                for rep in range(int(spec.repetitions_per_pace.get(pace, 0))):
                    lo, hi = _DURATION_RANGE[pace]
                    T = int(np.random.default_rng([seed, 1, g, pace_idx, rep]).integers(lo, hi + 1))
                    u = np.linspace(0.0, 1.0, T)
                    x = _evaluate_bank(templates[g], u)
                    if sep > 0:
                        style = w_shared * _evaluate_bank(shared[pi], u, unit_rms=True)
                        style += w_specific * _evaluate_bank(specific, u, unit_rms=True)
                        x = x + sep * style
                    if spec.noise_sigma > 0:
                        noise_rng = np.random.default_rng([seed, 4, pi, g, pace_idx, rep])
                        x = x + noise_rng.normal(0.0, spec.noise_sigma, size=x.shape)
                    ts = np.arange(T) / spec.rate_hz
                    recordings.append(Recording(x, ts, performer, g, pace))

    catalog = {g: GESTURE_NAMES.get(g, f"gesture-{g}") for g in gestures}
    return Corpus(device, recordings, catalog)


# ---------------------------------------------------------------------------
# conversion of externally sourced recordings

DEFAULT_CONVERT_PATTERN = r"(?P<performer>[A-Za-z0-9]+)[_\-/]+g?(?P<gesture>\d+)[_\-/]+(?P<rep>\d+)"


def _pace_for_repetition(rep):
    # six natural, two rapid, two slow, in that order
    if rep <= 6:
        return "natural"
    if rep <= 8:
        return "rapid"
    return "slow"


def convert_directory(src, dst, device, pattern=DEFAULT_CONVERT_PATTERN, suffixes=(".txt", ".csv", ".dat")):
    """Convert a tree of per-recording numeric text files into the corpus format.

    This is a stub for the public IITiS download, whose archive layout could
    not be inspected. Each file's path (relative to ``src``) is matched with
    ``pattern``, which must capture ``performer`` and ``gesture`` and may
    capture ``rep`` (1-based repetition, mapped to pace by the recording
    protocol) or ``pace``. Rows are whitespace- or comma-separated numbers;
    with m+1 columns the first is time in seconds, with m columns uniform
    timestamps at the device rate are synthesized.
    """
    if isinstance(device, str):
        try:
            device = PROFILES[device]
        except KeyError:
            raise DataError(f"unknown device profile {device!r}; known: {sorted(PROFILES)}") from None
    src = Path(src)
    rx = re.compile(pattern)
    m = device.sensor_count
    recordings = []
    for fpath in sorted(p for p in src.rglob("*") if p.is_file() and p.suffix.lower() in suffixes):
        rel = fpath.relative_to(src).as_posix()
        match = rx.search(rel)
        if not match:
            log.warning("skipping %s: name does not match pattern", rel)
            continue
        groups = match.groupdict()
        pace = groups.get("pace")
        if not pace:
            pace = _pace_for_repetition(int(groups["rep"])) if groups.get("rep") else "natural"
        rows = []
        with open(fpath, encoding="utf-8", errors="replace") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = [p for p in re.split(r"[\s,;]+", line.strip()) if p]
                if not parts:
                    continue
                try:
                    rows.append([float(p) for p in parts])
                except ValueError:
                    if rows:
                        raise CorpusFormatError("non-numeric row after data started", fpath, lineno) from None
                    continue  # header lines
        if not rows:
            raise CorpusFormatError("no numeric rows", fpath)
        table = np.array(rows, dtype=float)
        if table.shape[1] == m + 1:
            ts, samples = table[:, 0], table[:, 1:].T
        elif table.shape[1] == m:
            ts, samples = np.arange(table.shape[0]) / device.rate_hz, table.T
        else:
            raise CorpusFormatError(
                f"sensor count mismatch: {table.shape[1]} columns for device {device.name!r} (m={m})", fpath
            )
        try:
            recordings.append(Recording(samples, ts, groups["performer"], int(groups["gesture"]), pace))
        except DataError as exc:
            raise CorpusFormatError(str(exc), fpath) from None
    if not recordings:
        raise DataError(f"no recordings found under {src}")
    corpus = Corpus(device, recordings, {g: GESTURE_NAMES.get(g, f"gesture-{g}") for g in {r.gesture_id for r in recordings}})
    save_corpus(corpus, dst)
    return corpus
