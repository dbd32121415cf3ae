import csv
import struct

import numpy as np
import pytest


@pytest.fixture(scope="session")
def digits_csv(tmp_path_factory):
    """Digits CSV in the documented layout, generated from scikit-learn's bundled copy."""
    sklearn = pytest.importorskip("sklearn.datasets")
    raw = sklearn.load_digits()
    path = tmp_path_factory.mktemp("data") / "digits.csv"
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        for row, label in zip(raw.data, raw.target):
            writer.writerow([int(v) for v in row] + [int(label)])
    return path


@pytest.fixture(scope="session")
def mnist_idx(tmp_path_factory):
    """Small synthetic MNIST-format pair: 120 random 28x28 images with balanced labels."""
    rng = np.random.default_rng(0)
    count = 120
    images = rng.integers(0, 256, (count, 28, 28)).astype(np.uint8)
    labels = np.tile(np.arange(10), count // 10).astype(np.uint8)
    root = tmp_path_factory.mktemp("mnist")
    images_path = root / "images.idx"
    images_path.write_bytes(struct.pack(">4i", 2051, count, 28, 28) + images.tobytes())
    labels_path = root / "labels.idx"
    labels_path.write_bytes(struct.pack(">2i", 2049, count) + labels.tobytes())
    return images_path, labels_path
