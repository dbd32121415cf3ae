"""Dataset ingestion and split management for Digits (CSV) and MNIST (IDX).

Digits rows carry 64 integer pixels in 0..16 plus a label column; pixels
are scaled by 1/16. MNIST uses the big-endian IDX format (magic 2051 for
images, 2049 for labels); pixels are scaled by 1/255 and flattened.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MNIST_IMAGE_MAGIC = 2051
MNIST_LABEL_MAGIC = 2049
DIGITS_FEATURES = 64
NUM_CLASSES = 10


class DataFormatError(ValueError):
    """Malformed dataset file."""


class IdxMagicError(DataFormatError):
    """IDX magic number mismatch."""


class IdxTruncatedError(DataFormatError):
    """IDX payload shorter than its header promises."""


class IdxCountMismatchError(DataFormatError):
    """Image and label files disagree on the sample count."""


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (N, F) float64 in [0, 1]
    labels: np.ndarray    # (N,) int64 in 0..9

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise DataFormatError(f"features {self.features.shape} do not match labels {self.labels.shape}")
        if self.features.shape[0] == 0:
            raise DataFormatError("dataset is empty")
        if self.features.min() < 0.0 or self.features.max() > 1.0:
            raise DataFormatError("features must lie in [0, 1]")
        if self.labels.min() < 0 or self.labels.max() >= NUM_CLASSES:
            raise DataFormatError(f"labels must lie in 0..{NUM_CLASSES - 1}")

    def __len__(self) -> int:
        return self.features.shape[0]


def load_digits(path: str | Path) -> Dataset:
    """Load the 8x8 Digits CSV: 64 integer pixel columns (0..16) plus a label column."""
    rows: list[list[int]] = []
    with open(path, newline="") as handle:
        for lineno, row in enumerate(csv.reader(handle), start=1):
            if not row:
                continue
            if len(row) != DIGITS_FEATURES + 1:
                raise DataFormatError(f"line {lineno}: expected {DIGITS_FEATURES + 1} fields, got {len(row)}")
            try:
                values = [int(field) for field in row]
            except ValueError:
                raise DataFormatError(f"line {lineno}: non-integer field") from None
            if not all(0 <= v <= 16 for v in values[:-1]):
                raise DataFormatError(f"line {lineno}: pixel outside 0..16")
            if not 0 <= values[-1] < NUM_CLASSES:
                raise DataFormatError(f"line {lineno}: label {values[-1]} outside 0..{NUM_CLASSES - 1}")
            rows.append(values)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    data = np.array(rows, dtype=np.int64)
    return Dataset(data[:, :-1].astype(float) / 16.0, data[:, -1])


def _read_idx_header(raw: bytes, expected_magic: int, dims: int, path) -> tuple[list[int], int]:
    header = 4 * (1 + dims)
    if len(raw) < header:
        raise IdxTruncatedError(f"{path}: file shorter than its {header}-byte header")
    fields = struct.unpack(f">{1 + dims}i", raw[:header])
    if fields[0] != expected_magic:
        raise IdxMagicError(f"{path}: magic {fields[0]} != {expected_magic}")
    return list(fields[1:]), header


def load_mnist(images_path: str | Path, labels_path: str | Path) -> Dataset:
    """Load MNIST from IDX files; pixels scale to [0, 1] and flatten to 784 features."""
    raw_images = Path(images_path).read_bytes()
    (count, rows, cols), offset = _read_idx_header(raw_images, MNIST_IMAGE_MAGIC, 3, images_path)
    expected = count * rows * cols
    if len(raw_images) - offset < expected:
        raise IdxTruncatedError(f"{images_path}: {len(raw_images) - offset} payload bytes, need {expected}")
    pixels = np.frombuffer(raw_images, dtype=np.uint8, count=expected, offset=offset)
    features = pixels.reshape(count, rows * cols).astype(float) / 255.0

    raw_labels = Path(labels_path).read_bytes()
    (label_count,), offset = _read_idx_header(raw_labels, MNIST_LABEL_MAGIC, 1, labels_path)
    if len(raw_labels) - offset < label_count:
        raise IdxTruncatedError(f"{labels_path}: {len(raw_labels) - offset} payload bytes, need {label_count}")
    labels = np.frombuffer(raw_labels, dtype=np.uint8, count=label_count, offset=offset).astype(np.int64)
    if label_count != count:
        raise IdxCountMismatchError(f"{count} images but {label_count} labels")
    return Dataset(features, labels)


def split(dataset: Dataset, ratio: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified, seeded train/validation split; disjoint and exhaustive."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must lie strictly between 0 and 1, got {ratio}")
    rng = np.random.default_rng(seed)
    train_idx: list[np.ndarray] = []
    val_idx: list[np.ndarray] = []
    for label in np.unique(dataset.labels):
        members = np.flatnonzero(dataset.labels == label)
        if members.size < 2:
            raise ValueError(f"class {label} has {members.size} sample(s); need >= 2 to stratify")
        perm = rng.permutation(members)
        take = min(max(int(round(ratio * members.size)), 1), members.size - 1)
        train_idx.append(perm[:take])
        val_idx.append(perm[take:])
    train = np.sort(np.concatenate(train_idx))
    val = np.sort(np.concatenate(val_idx))
    return (Dataset(dataset.features[train], dataset.labels[train]),
            Dataset(dataset.features[val], dataset.labels[val]))


def subsample(dataset: Dataset, size: int, seed: int) -> Dataset:
    """Stratified subsample of roughly proportional class counts, exactly `size` rows."""
    if size <= 0 or size > len(dataset):
        raise ValueError(f"subsample size must lie in 1..{len(dataset)}, got {size}")
    rng = np.random.default_rng(seed)
    labels = np.unique(dataset.labels)
    counts = {int(c): np.flatnonzero(dataset.labels == c) for c in labels}
    quota = {c: max(1, int(size * idx.size / len(dataset))) for c, idx in counts.items()}
    while sum(quota.values()) > size:
        largest = max(quota, key=lambda c: (quota[c], c))
        quota[largest] -= 1
    while sum(quota.values()) < size:
        # hand remaining rows to the classes with spare samples, largest first
        candidates = [c for c in quota if quota[c] < counts[c].size]
        chosen = max(candidates, key=lambda c: (counts[c].size - quota[c], c))
        quota[chosen] += 1
    picked = [rng.permutation(counts[c])[: quota[c]] for c in sorted(quota)]
    keep = np.sort(np.concatenate(picked))
    return Dataset(dataset.features[keep], dataset.labels[keep])
