"""Synthetic targets, a synthetic sensor-window dataset, CSV ingestion,
normalization, and subject-based splitting.

Every generator is a pure function of its parameters and seed.

Synthetic window generator (closed form, so labels are recoverable in the
noiseless limit): class c rides at base frequency ``2*(c+1)`` cycles per
window with a per-channel phase ``2*pi*(c*C + ch)/(classes*C)``; subject s
scales the base amplitude by ``0.8 + 0.4*s/(subjects-1)``; Gaussian noise
of the requested sigma is added on top.  The default base amplitude of
0.35 against the default sigma of 0.5 keeps the task solvable but far from
saturated, so model-quality differences stay visible.

CSV schema (one sample per row): header ``subject,label,ch0..ch{C-1}``;
windows are consecutive L-row blocks per subject in file order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .model import WindowShape


@dataclass(frozen=True)
class FunctionDataset:
    """Scalar regression pairs from a named generator."""

    x: np.ndarray  # (N, 1)
    y: np.ndarray  # (N, 1)
    name: str
    params: dict
    seed: int


def gen_step(n: int, seed: int, amplitude: float = 1.0, offset: float = 0.0) -> FunctionDataset:
    """x uniform on [-1, 1]; y = -amplitude below 0, +amplitude from 0 up."""
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, (n, 1))
    y = offset + np.where(x < 0.0, -amplitude, amplitude)
    return FunctionDataset(x, y, "step", {"amplitude": amplitude, "offset": offset}, seed)


def gen_sincos(n: int, seed: int) -> FunctionDataset:
    """x uniform on [0, 1]; y = sin(2 pi x) cos(2 pi x) = sin(4 pi x) / 2."""
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, (n, 1))
    y = np.sin(2.0 * np.pi * x) * np.cos(2.0 * np.pi * x)
    return FunctionDataset(x, y, "sincos", {}, seed)


FUNCTION_GENERATORS = {"step": gen_step, "sincos": gen_sincos}


def split_function_dataset(ds: FunctionDataset, train_frac: float = 0.8, seed: int = 0):
    """Seeded shuffle split into ((x_train, y_train), (x_test, y_test))."""
    n = ds.x.shape[0]
    perm = np.random.default_rng(seed).permutation(n)
    cut = int(round(train_frac * n))
    tr, te = perm[:cut], perm[cut:]
    return (ds.x[tr], ds.y[tr]), (ds.x[te], ds.y[te])


# ---------------------------------------------------------------------------
# windowed sensor data


@dataclass
class HarDataset:
    """Windows (N, L, C) with integer labels and subject ids.

    stats is (mean, std) per channel when the windows have been normalized,
    else None.
    """

    windows: np.ndarray
    labels: np.ndarray
    subjects: np.ndarray
    stats: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        self.windows = np.asarray(self.windows, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.subjects = np.asarray(self.subjects, dtype=np.int64)
        n = self.windows.shape[0]
        if self.labels.shape != (n,) or self.subjects.shape != (n,):
            raise ValueError("windows, labels and subjects must agree in length")

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0


def gen_synth_har(
    classes: int,
    subjects: int,
    windows_per_subject: int,
    shape: WindowShape,
    noise_sigma: float,
    seed: int,
    base_amplitude: float = 0.35,
) -> HarDataset:
    """Deterministic class-coded sinusoid windows; labels cycle per subject."""
    if classes < 2:
        raise ValueError(f"need at least 2 classes, got {classes}")
    if subjects < 1 or windows_per_subject < 1:
        raise ValueError("subjects and windows_per_subject must be positive")
    rng = np.random.default_rng(seed)
    n = subjects * windows_per_subject
    t = np.arange(shape.L) / shape.L
    windows = np.empty((n, shape.L, shape.C))
    labels = np.empty(n, dtype=np.int64)
    subj = np.empty(n, dtype=np.int64)
    i = 0
    for s in range(subjects):
        amp = base_amplitude * (1.0 if subjects == 1 else 0.8 + 0.4 * s / (subjects - 1))
        for w in range(windows_per_subject):
            c = w % classes
            freq = 2.0 * (c + 1)
            for ch in range(shape.C):
                phase = 2.0 * np.pi * (c * shape.C + ch) / (classes * shape.C)
                windows[i, :, ch] = amp * np.sin(2.0 * np.pi * freq * t + phase)
            labels[i] = c
            subj[i] = s
            i += 1
    if noise_sigma > 0:
        windows += noise_sigma * rng.standard_normal(windows.shape)
    return HarDataset(windows, labels, subj)


# ---------------------------------------------------------------------------
# normalization


def fit_normalization(windows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean/std over all samples of all windows."""
    mu = windows.mean(axis=(0, 1))
    sigma = windows.std(axis=(0, 1))
    sigma = np.where(sigma == 0.0, 1.0, sigma)  # constant channels pass through
    return mu, sigma


def apply_normalization(windows: np.ndarray, stats) -> np.ndarray:
    mu, sigma = stats
    return (windows - mu) / sigma


def invert_normalization(windows: np.ndarray, stats) -> np.ndarray:
    mu, sigma = stats
    return windows * sigma + mu


# ---------------------------------------------------------------------------
# splits


@dataclass
class SplitData:
    """One train/val/test split of normalized windows."""

    train: tuple[np.ndarray, np.ndarray]
    val: tuple[np.ndarray, np.ndarray]
    test: tuple[np.ndarray, np.ndarray]
    stats: tuple[np.ndarray, np.ndarray]
    test_subjects: tuple[int, ...] = ()


def _assemble_split(ds: HarDataset, train_mask, val_mask, test_mask, test_subjects) -> SplitData:
    stats = fit_normalization(ds.windows[train_mask])
    parts = []
    for mask in (train_mask, val_mask, test_mask):
        parts.append((apply_normalization(ds.windows[mask], stats), ds.labels[mask]))
    return SplitData(parts[0], parts[1], parts[2], stats, tuple(int(s) for s in test_subjects))


def make_holdout_split(
    ds: HarDataset,
    test_subjects: tuple[int, ...] | None = None,
    val_frac: float = 0.2,
    seed: int = 0,
) -> SplitData:
    """Subject-held-out split: fixed test subjects, seeded val subjects,
    normalization fitted on train only."""
    all_subjects = np.unique(ds.subjects)
    if all_subjects.size < 3:
        raise ValueError(f"need at least 3 subjects, got {all_subjects.size}")
    if test_subjects is None:
        n_test = max(1, round(0.25 * all_subjects.size))
        test_subjects = tuple(all_subjects[-n_test:].tolist())
    rest = np.array([s for s in all_subjects if s not in set(test_subjects)])
    if rest.size < 2:
        raise ValueError("not enough subjects left for train and validation")
    rng = np.random.default_rng(seed)
    n_val = max(1, round(val_frac * rest.size))
    val_subjects = rng.choice(rest, size=n_val, replace=False)
    val_set = set(val_subjects.tolist())
    test_set = set(test_subjects)
    train_mask = np.array([s not in val_set and s not in test_set for s in ds.subjects])
    val_mask = np.array([s in val_set for s in ds.subjects])
    test_mask = np.array([s in test_set for s in ds.subjects])
    return _assemble_split(ds, train_mask, val_mask, test_mask, test_subjects)


def loso_splits(ds: HarDataset, val_frac: float = 0.2, seed: int = 0) -> list[SplitData]:
    """One split per subject: that subject tests, a seeded fraction of the
    rest validates, the remainder trains."""
    all_subjects = np.unique(ds.subjects)
    if all_subjects.size < 3:
        raise ValueError(f"LOSO needs at least 3 subjects, got {all_subjects.size}")
    splits = []
    for fold, test_subject in enumerate(all_subjects.tolist()):
        rest = np.array([s for s in all_subjects if s != test_subject])
        rng = np.random.default_rng([seed, fold])
        n_val = max(1, round(val_frac * rest.size))
        val_subjects = set(rng.choice(rest, size=n_val, replace=False).tolist())
        train_mask = np.array([s != test_subject and s not in val_subjects for s in ds.subjects])
        val_mask = np.array([s in val_subjects for s in ds.subjects])
        test_mask = ds.subjects == test_subject
        splits.append(_assemble_split(ds, train_mask, val_mask, test_mask, (test_subject,)))
    return splits


# ---------------------------------------------------------------------------
# CSV ingestion


class CsvFormatError(ValueError):
    """Malformed windowed-CSV input; message carries the line number."""


def save_windowed_csv(path, ds: HarDataset) -> None:
    """Write the documented schema: subject,label,ch0..ch{C-1}; L rows per window."""
    n, L, C = ds.windows.shape
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["subject", "label"] + [f"ch{i}" for i in range(C)])
        for w in range(n):
            for row in range(L):
                writer.writerow(
                    [ds.subjects[w], ds.labels[w]] + [f"{v:.17g}" for v in ds.windows[w, row]]
                )


def load_windowed_csv(
    path,
    shape: WindowShape,
    label_column: str = "label",
    subject_column: str = "subject",
    mixed_labels: str = "strict",
) -> HarDataset:
    """Parse consecutive L-row blocks per subject into windows.

    Rows of one subject are collected in file order (runs need not be
    contiguous) and chunked into windows of L rows; a leftover block is an
    error.  A window mixing labels raises in strict mode and takes the
    majority label (lowest on ties) with mixed_labels="majority".
    """
    if mixed_labels not in ("strict", "majority"):
        raise ValueError(f"mixed_labels must be strict or majority, got {mixed_labels!r}")
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        try:
            subj_idx = header.index(subject_column)
            label_idx = header.index(label_column)
        except ValueError as err:
            raise CsvFormatError(f"{path}: line 1: missing column ({err})") from None
        channel_idx = [i for i in range(len(header)) if i not in (subj_idx, label_idx)]
        if len(channel_idx) != shape.C:
            raise CsvFormatError(
                f"{path}: line 1: expected {shape.C} channel columns, found {len(channel_idx)}"
            )

        per_subject: dict[int, list[tuple[int, np.ndarray]]] = {}
        order: list[int] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvFormatError(
                    f"{path}: line {lineno}: expected {len(header)} columns, got {len(row)}"
                )
            try:
                subject = int(row[subj_idx])
            except ValueError:
                raise CsvFormatError(
                    f"{path}: line {lineno}: bad subject id {row[subj_idx]!r}"
                ) from None
            try:
                label = int(row[label_idx])
            except ValueError:
                raise CsvFormatError(
                    f"{path}: line {lineno}: unknown label {row[label_idx]!r}"
                ) from None
            if label < 0:
                raise CsvFormatError(f"{path}: line {lineno}: unknown label {label}")
            try:
                values = np.array([float(row[i]) for i in channel_idx])
            except ValueError:
                raise CsvFormatError(
                    f"{path}: line {lineno}: non-numeric channel value"
                ) from None
            if subject not in per_subject:
                per_subject[subject] = []
                order.append(subject)
            per_subject[subject].append((label, values))

    windows, labels, subjects = [], [], []
    window_index = 0
    for subject in order:
        rows = per_subject[subject]
        if len(rows) % shape.L != 0:
            raise CsvFormatError(
                f"{path}: subject {subject} has {len(rows)} rows, not divisible by L={shape.L}"
            )
        for start in range(0, len(rows), shape.L):
            block = rows[start : start + shape.L]
            block_labels = np.array([lab for lab, _ in block])
            if np.all(block_labels == block_labels[0]):
                label = int(block_labels[0])
            elif mixed_labels == "majority":
                label = int(np.argmax(np.bincount(block_labels)))
            else:
                raise CsvFormatError(
                    f"{path}: window {window_index} (subject {subject}) mixes labels "
                    f"{sorted(set(block_labels.tolist()))}"
                )
            windows.append(np.stack([vals for _, vals in block]))
            labels.append(label)
            subjects.append(subject)
            window_index += 1
    if not windows:
        raise CsvFormatError(f"{path}: no data rows")
    return HarDataset(np.stack(windows), np.array(labels), np.array(subjects))
