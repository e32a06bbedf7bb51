"""Dataset ingestion, deterministic splits, and synthetic benchmark tasks.

Canonical interchange is CSV: one file per sample, first column a time
index, remaining columns the channels.  Classification labels live in a
``labels.csv`` sidecar mapping file name to label.  Regression targets are
derived from a declared channel shifted ``horizon`` steps into the future.
A converter recipe for archive formats lives in docs/data_format.md.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError

LAYOUTS = ("series_csv",)


@dataclass
class DatasetManifest:
    """Declared shape and task of an on-disk dataset."""

    name: str
    path: str
    layout: str = "series_csv"
    n_channels: int = 1
    seq_len: int = 0
    task: str = "classification"
    split_seed: int = 0
    target_channel: int = 0   # regression only
    horizon: int = 0          # regression: steps ahead to predict

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ParameterError(f"unknown layout {self.layout!r}")
        if self.task not in ("classification", "regression"):
            raise ParameterError(f"unknown task {self.task!r}")


_MANIFEST_FIELDS = ("name", "path", "layout", "n_channels", "seq_len", "task",
                    "split_seed", "target_channel", "horizon")


def load_manifest(path: str) -> DatasetManifest:
    """Read a manifest from ``key = value`` lines; unknown keys are rejected."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not sep or key not in _MANIFEST_FIELDS:
                raise DataError(f"{path}:{lineno}: unknown manifest key {key!r}")
            if key in ("n_channels", "seq_len", "split_seed", "target_channel",
                       "horizon"):
                values[key] = int(val)
            else:
                values[key] = val
    if "name" not in values or "path" not in values:
        raise DataError(f"{path}: manifest needs at least 'name' and 'path'")
    if not os.path.isabs(values["path"]):
        values["path"] = os.path.join(os.path.dirname(os.path.abspath(path)),
                                      values["path"])
    return DatasetManifest(**values)


def save_manifest(path: str, manifest: DatasetManifest):
    with open(path, "w", encoding="utf-8") as fh:
        for key in _MANIFEST_FIELDS:
            fh.write(f"{key} = {getattr(manifest, key)}\n")


@dataclass
class Dataset:
    """In-memory dataset: x (n, L, C); y labels (n,) or targets (n, L, d)."""

    x: np.ndarray
    y: np.ndarray
    task: str
    name: str = ""


def read_series_csv(path: str, n_channels: int | None = None) -> np.ndarray:
    """Read one sample file: time index column plus channel columns.

    Raises DataError with the offending line number on ragged rows, parse
    failures, or NaN values.
    """
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if lineno == 1 and any(not _is_number(c) for c in cells):
                continue  # header
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise DataError(
                    f"{path}:{lineno}: ragged row ({len(cells)} cells, expected {width})")
            try:
                values = [float(c) for c in cells]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric value") from None
            if any(np.isnan(values)):
                raise DataError(f"{path}:{lineno}: NaN value")
            rows.append(values[1:])  # drop the time index
    if not rows:
        raise DataError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=np.float64)
    if n_channels is not None and arr.shape[1] != n_channels:
        raise DataError(
            f"{path}: {arr.shape[1]} channels, manifest declares {n_channels}")
    return arr


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def _read_labels(path: str) -> dict:
    labels = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if lineno == 1 and not _is_number(cells[-1]):
                continue  # header
            if len(cells) != 2:
                raise DataError(f"{path}:{lineno}: expected 'sample,label'")
            labels[cells[0]] = int(float(cells[1]))
    return labels


def ingest(path: str, manifest: DatasetManifest) -> Dataset:
    """Load a series_csv directory into validated tensors."""
    sample_files = sorted(
        f for f in os.listdir(path)
        if f.endswith(".csv") and f != "labels.csv")
    if not sample_files:
        raise DataError(f"{path}: no sample files")
    series = []
    for fname in sample_files:
        arr = read_series_csv(os.path.join(path, fname), manifest.n_channels)
        if manifest.seq_len and arr.shape[0] != manifest.seq_len:
            raise DataError(
                f"{fname}: length {arr.shape[0]}, manifest declares {manifest.seq_len}")
        series.append(arr)
    lengths = {s.shape[0] for s in series}
    if len(lengths) > 1:
        raise DataError(f"{path}: mixed sequence lengths {sorted(lengths)}")
    x = np.stack(series)

    if manifest.task == "classification":
        labels_path = os.path.join(path, "labels.csv")
        if not os.path.exists(labels_path):
            raise DataError(f"{path}: classification needs a labels.csv sidecar")
        labels = _read_labels(labels_path)
        try:
            y = np.asarray([labels[f] for f in sample_files], dtype=np.int64)
        except KeyError as missing:
            raise DataError(f"labels.csv has no entry for {missing}") from None
        return Dataset(x=x, y=y, task="classification", name=manifest.name)

    if manifest.horizon < 1:
        raise ParameterError("regression manifests need horizon >= 1")
    if not 0 <= manifest.target_channel < x.shape[2]:
        raise ParameterError("target_channel out of range")
    # target at step t is the declared channel at t + horizon; the tail,
    # which has no future value, repeats the final observation
    tgt = x[:, :, manifest.target_channel]
    y = np.concatenate(
        [tgt[:, manifest.horizon:], np.repeat(tgt[:, -1:], manifest.horizon, axis=1)],
        axis=1)[..., None]
    return Dataset(x=x, y=y, task="regression", name=manifest.name)


# -- splits ---------------------------------------------------------------------

def split_indices(n: int, fractions=(0.70, 0.15, 0.15), seed: int = 0):
    """Deterministic shuffled index partition; sizes round down except train."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ParameterError("split fractions must sum to 1")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_val = int(n * fractions[1])
    n_test = int(n * fractions[2])
    n_train = n - n_val - n_test
    return (perm[:n_train], perm[n_train : n_train + n_val],
            perm[n_train + n_val :])


def split_dataset(ds: Dataset, fractions=(0.70, 0.15, 0.15), seed: int = 0):
    from .train import SplitData

    tr, va, te = split_indices(ds.x.shape[0], fractions, seed)
    return SplitData(ds.x[tr], ds.y[tr], ds.x[va], ds.y[va], ds.x[te], ds.y[te])


# -- synthetic tasks --------------------------------------------------------------

def make_frequency_task(n_samples: int, seq_len: int = 1000, *, seed: int = 0,
                        periods=(40.0, 20.0), noise: float = 0.2):
    """Two classes of noisy sinusoids distinguished only by frequency.

    Amplitude and phase are randomized identically for both classes, so the
    per-timestep marginals match and only temporal structure separates them.
    Returns (x, y) with x of shape (n, L, 1) and integer labels.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(seq_len)
    y = rng.integers(0, 2, n_samples)
    amp = rng.uniform(0.8, 1.2, n_samples)
    phase = rng.uniform(0.0, 2.0 * np.pi, n_samples)
    omega = 2.0 * np.pi / np.asarray(periods)[y]
    x = amp[:, None] * np.sin(omega[:, None] * t + phase[:, None])
    x = x + rng.normal(0.0, noise, x.shape)
    return x[..., None], y


def spectral_power_feature(x: np.ndarray, periods=(40.0, 20.0)) -> np.ndarray:
    """Oracle feature for the frequency task: per-class band power.

    Projects each sequence onto the sine/cosine pair at each class frequency,
    returning (n, len(periods)) powers.  A linear classifier on this feature
    separates the task nearly perfectly, which calibrates how much headroom
    the spiking model has.
    """
    x = x[..., 0]
    t = np.arange(x.shape[1])
    feats = []
    for period in periods:
        w = 2.0 * np.pi / period
        c = x @ np.cos(w * t) * (2.0 / x.shape[1])
        s = x @ np.sin(w * t) * (2.0 / x.shape[1])
        feats.append(c * c + s * s)
    return np.stack(feats, axis=1)


def make_delayed_sum_task(n_samples: int, seq_len: int = 2000, *, delay: int = 500,
                          window: int = 25, seed: int = 0,
                          periods=(40.0, 64.0, 100.0, 160.0),
                          noise: float = 0.05):
    """Regression task: reproduce the windowed mean of the input from
    ``delay`` steps earlier.

    Inputs are random mixtures of sinusoids (periods chosen inside the
    resonators' natural band) plus noise; the target at step t is the mean
    of x over [t - delay - window + 1, t - delay], zero before the window
    exists.  Because the components are periodic, tracking their phases
    makes the delayed target a linear readout of oscillator state, so the
    task rewards long-horizon memory without needing a verbatim buffer.
    Predicting the global mean is the baseline.  Returns (x, y) with shapes
    (n, L, 1) and (n, L, 1).
    """
    if delay + window >= seq_len:
        raise ParameterError("delay + window must be smaller than seq_len")
    rng = np.random.default_rng(seed)
    t = np.arange(seq_len)
    x = np.zeros((n_samples, seq_len))
    for period in periods:
        a = rng.normal(0.0, 1.0, n_samples)[:, None]
        phi = rng.uniform(0.0, 2.0 * np.pi, n_samples)[:, None]
        x += a * np.sin(2.0 * np.pi * t / period + phi)
    x /= np.sqrt(len(periods))
    x += rng.normal(0.0, noise, x.shape)

    kernel = np.ones(window) / window
    y = np.zeros_like(x)
    for i in range(n_samples):
        smoothed = np.convolve(x[i], kernel, mode="full")[: seq_len]
        # smoothed[t] = mean of x[t-window+1 .. t] once the window is full
        y[i, delay + window - 1 :] = smoothed[window - 1 : seq_len - delay]
    return x[..., None], y[..., None]
