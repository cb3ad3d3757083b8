from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..dataio import Dataset
from .params import Knn

_METRIC = {"euclidean": kernels.EUCLIDEAN, "manhattan": kernels.MANHATTAN}


@dataclass(frozen=True)
class KnnModel:
    """Nothing is learned: the model is the training set plus ``params``."""

    train_features: np.ndarray
    train_labels: np.ndarray
    params: Knn
    n_classes: int

    @property
    def n_features(self) -> int:
        return self.train_features.shape[1]

    def predict(self, features: np.ndarray) -> np.ndarray:
        return predict_knn(self, features)


def fit_knn(params: Knn, train: Dataset) -> KnnModel:
    if params.k > train.n_rows:
        raise ValueError(f"k={params.k} exceeds the {train.n_rows} training rows")
    return KnnModel(train.features, train.labels, params, train.n_classes)


def predict_knn(model: KnnModel, features: np.ndarray) -> np.ndarray:
    return kernels.active().knn_predict(
        model.train_features,
        model.train_labels,
        features,
        model.params.k,
        _METRIC[model.params.metric],
        model.n_classes,
    )


def knn_neighbors(model: KnnModel, query) -> list[tuple[int, float]]:
    """The k nearest training rows as (index, distance), nearest first."""
    q = np.ascontiguousarray(query, dtype=np.float64)
    metric = _METRIC[model.params.metric]
    idx, d = kernels.active().knn_topk(model.train_features, q, model.params.k, metric)
    if metric == kernels.EUCLIDEAN:
        return [(int(i), math.sqrt(v)) for i, v in zip(idx, d)]
    return [(int(i), float(v)) for i, v in zip(idx, d)]
