"""From-scratch KNN, SVM, decision tree and random forest behind one fit/predict pair.

Every vote in here (KNN neighbours, leaf plurality, forest trees, one-vs-one
SVM) breaks ties toward the smallest class id.
"""
from __future__ import annotations

from typing import Union

import numpy as np

from ..dataio import Dataset
from .knn import KnnModel, fit_knn, knn_neighbors, predict_knn
from .params import ALGORITHMS, DTree, HyperParams, Knn, RForest, Svm, algorithm_of
from .svm import BinarySvm, ConvergenceWarning, SvmModel, fit_svm_pairwise, kernel_value
from .tree import (
    DTreeModel, LeafNode, RForestModel, SplitNode, best_split, fit_dtree, fit_rforest,
    forest_merge, gini, grow_tree, tree_seed,
)

TrainedModel = Union[KnnModel, SvmModel, DTreeModel, RForestModel]

__all__ = [
    "ALGORITHMS", "BinarySvm", "ConvergenceWarning", "DTree", "DTreeModel", "HyperParams", "Knn",
    "KnnModel", "LeafNode", "RForest", "RForestModel", "SplitNode", "Svm", "SvmModel",
    "TrainedModel", "algorithm_of", "best_split", "fit", "fit_svm_pairwise", "forest_merge",
    "gini", "grow_tree", "kernel_value", "knn_neighbors", "predict", "tree_seed",
]


def fit(params: HyperParams, train: Dataset) -> TrainedModel:
    if train.n_rows == 0:
        raise ValueError("cannot fit on an empty training set")
    if isinstance(params, Knn):
        return fit_knn(params, train)
    if isinstance(params, Svm):
        return fit_svm_pairwise(params, train)
    if isinstance(params, DTree):
        return fit_dtree(params, train)
    if isinstance(params, RForest):
        return fit_rforest(params, train)
    raise TypeError(f"unsupported hyperparameters {params!r}")


def predict(model: TrainedModel, features) -> np.ndarray:
    x = np.ascontiguousarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise ValueError(f"expected an (n, {model.n_features}) feature matrix, got shape {x.shape}")
    if isinstance(model, KnnModel):
        return predict_knn(model, x)
    return model.predict(x)
