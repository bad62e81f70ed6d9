"""Resampling, per-sensor t-statistic normalization and vectorization."""

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)

DEFAULT_LENGTH = 100
LAYOUTS = ("time_major", "sensor_major")
CONSTANT_RTOL = 1e-6


@dataclass(frozen=True, eq=False)
class NormalizationState:
    mean: np.ndarray
    std: np.ndarray
    target_length: int
    constant_sensors: tuple = ()

    @property
    def sensor_count(self):
        return self.mean.shape[0]


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    performer_id: str
    gesture_id: int
    pace: str


def resample(recording, t=DEFAULT_LENGTH):
    """Linearly interpolate every sensor onto ``t`` equally spaced instants.

    The grid spans the first to the last timestamp inclusive, so the first
    and last columns reproduce the original endpoint samples exactly.
    """
    if t < 2:
        raise DataError(f"target length must be >= 2, got {t}")
    ts = recording.timestamps
    grid = np.linspace(ts[0], ts[-1], t)
    grid[0], grid[-1] = ts[0], ts[-1]
    samples = recording.samples
    out = np.empty((samples.shape[0], t))
    for i in range(samples.shape[0]):
        out[i] = np.interp(grid, ts, samples[i])
    return out


def fit_normalization(resampled):
    """Pooled per-sensor mean and population standard deviation.

    A sensor whose spread is zero (relative to its offset, see
    ``CONSTANT_RTOL``) gets std 1 so it maps to all
    zeros; a warning names it.
    """
    stack = _as_stack(resampled)
    if stack.shape[0] == 0:
        raise DataError("cannot fit normalization on an empty set of recordings")
    m, t = stack.shape[1], stack.shape[2]
    pooled = stack.transpose(1, 0, 2).reshape(m, -1)
    mean = pooled.mean(axis=1)
    # one refinement pass keeps the centred data's mean at rounding level
    # even when the offset dwarfs the spread
    mean = mean + (pooled - mean[:, None]).mean(axis=1)
    std = np.sqrt(((pooled - mean[:, None]) ** 2).mean(axis=1))
    # spread below 1e-6 of the offset is beneath what float64 can centre
    # reliably, so such a channel counts as constant
    constant = np.nonzero((std == 0) | (std <= CONSTANT_RTOL * np.abs(mean)))[0]
    if constant.size:
        warnings.warn(
            f"constant sensor channel(s) {[int(i) + 1 for i in constant]}: std set to 1",
            RuntimeWarning,
            stacklevel=2,
        )
        std = std.copy()
        std[constant] = 1.0
    mean.setflags(write=False)
    std.setflags(write=False)
    return NormalizationState(mean, std, t, tuple(int(i) for i in constant))


def normalize_matrices(stack, state, layout="time_major"):
    """Normalize an (n, m, t) stack and flatten each matrix to length m*t."""
    stack = np.asarray(stack, dtype=float)
    if stack.ndim != 3 or stack.shape[1:] != (state.sensor_count, state.target_length):
        raise DataError(
            f"shape mismatch: expected (*, {state.sensor_count}, {state.target_length}), got {stack.shape}"
        )
    z = (stack - state.mean[None, :, None]) / state.std[None, :, None]
    n = z.shape[0]
    if layout == "time_major":
        # all m sensors at time 1, then all m at time 2, ...
        return z.transpose(0, 2, 1).reshape(n, -1)
    if layout == "sensor_major":
        return z.reshape(n, -1)
    raise DataError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")


def normalize_and_vectorize(resampled, state, performer_id, gesture_id, pace="natural", layout="time_major"):
    resampled = np.asarray(resampled, dtype=float)
    if resampled.shape != (state.sensor_count, state.target_length):
        raise DataError(
            f"shape mismatch: expected {(state.sensor_count, state.target_length)}, got {resampled.shape}"
        )
    values = normalize_matrices(resampled[None], state, layout)[0]
    return FeatureVector(values, str(performer_id), int(gesture_id), pace)


def resample_corpus(corpus, t=DEFAULT_LENGTH):
    """Stack of resampled matrices, shape (n_recordings, m, t)."""
    if len(corpus.recordings) == 0:
        raise DataError("corpus has no recordings")
    return np.stack([resample(r, t) for r in corpus.recordings])


def preprocess_corpus(corpus, t=DEFAULT_LENGTH, layout="time_major"):
    stack = resample_corpus(corpus, t)
    state = fit_normalization(stack)
    X = normalize_matrices(stack, state, layout)
    vectors = [
        FeatureVector(X[i], r.performer_id, r.gesture_id, r.pace) for i, r in enumerate(corpus.recordings)
    ]
    return vectors, state


def _as_stack(resampled):
    if isinstance(resampled, np.ndarray) and resampled.ndim == 3:
        return resampled.astype(float, copy=False)
    mats = [np.asarray(a, dtype=float) for a in resampled]
    if not mats:
        return np.empty((0, 0, 0))
    shape = mats[0].shape
    for k, a in enumerate(mats):
        if a.ndim != 2 or a.shape != shape:
            raise DataError(f"matrix {k} has shape {a.shape}, expected {shape}")
    return np.stack(mats)
