"""Gaussian-blob datasets written in the same CSV dialect load_csv reads."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from . import _rng


def synthetic_arrays(n_rows: int, n_features: int, n_classes: int = 2, class_separation: float = 1.0,
                     seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Unit-variance blobs whose centroids sit ``class_separation`` apart on the diagonal.

    Classes are exactly balanced (row i has class i mod n_classes before shuffling).
    """
    if not n_rows >= n_classes >= 2:
        raise ValueError("need n_rows >= n_classes >= 2")
    if n_features < 1:
        raise ValueError("need at least one feature")
    rng = _rng.generator(seed)
    labels = rng.permutation(np.arange(n_rows) % n_classes)
    direction = np.ones(n_features) / np.sqrt(n_features)
    centroids = class_separation * np.arange(n_classes)[:, None] * direction[None, :]
    x = centroids[labels] + rng.standard_normal((n_rows, n_features))
    return x, labels.astype(np.int64)


def generate_synthetic(path, n_rows: int, n_features: int, n_classes: int = 2, class_separation: float = 1.0,
                       seed: int = 0, label_column: str = "label") -> Path:
    x, y = synthetic_arrays(n_rows, n_features, n_classes, class_separation, seed)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{j}" for j in range(n_features)] + [label_column])
        for row, lab in zip(x, y):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])
    return path
