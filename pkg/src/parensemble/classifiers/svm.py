from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..dataio import Dataset, random_sample
from .params import Svm

_KERNEL = {"linear": kernels.LINEAR, "poly": kernels.POLY, "sigmoid": kernels.SIGMOID}


class ConvergenceWarning(UserWarning):
    pass


def kernel_value(params: Svm, a, b, gamma: float | None = None) -> float:
    a = np.ascontiguousarray(a, dtype=np.float64)[None, :]
    b = np.ascontiguousarray(b, dtype=np.float64)[None, :]
    g = gamma if gamma is not None else (params.gamma or 1.0 / a.shape[1])
    return float(kernels.active().kernel_matrix(a, b, _KERNEL[params.kernel], g, params.coef0, params.degree)[0, 0])


@dataclass(frozen=True)
class BinarySvm:
    """One class pair; a positive decision votes for ``positive``."""

    positive: int
    negative: int
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha * y for each support vector
    alpha: np.ndarray
    bias: float  # decision = sum(dual_coef * K(sv, x)) - bias
    iterations: int
    converged: bool


@dataclass(frozen=True)
class SvmModel:
    params: Svm
    pairs: tuple[BinarySvm, ...]
    gamma: float
    n_features: int
    n_classes: int
    n_train: int
    constant_class: int = -1

    @property
    def converged(self) -> bool:
        return all(p.converged for p in self.pairs)

    def decision_function(self, pair: BinarySvm, features: np.ndarray) -> np.ndarray:
        if len(pair.support_vectors) == 0:
            return np.full(features.shape[0], -pair.bias)
        p = self.params
        return kernels.active().svm_decision(pair.support_vectors, pair.dual_coef, pair.bias, features,
                                             _KERNEL[p.kernel], self.gamma, p.coef0, p.degree)

    def predict(self, features: np.ndarray) -> np.ndarray:
        if self.constant_class >= 0:
            return np.full(features.shape[0], self.constant_class, dtype=np.int64)
        votes = np.zeros((features.shape[0], self.n_classes), dtype=np.int64)
        rows = np.arange(features.shape[0])
        for pair in self.pairs:
            winner = np.where(self.decision_function(pair, features) > 0, pair.positive, pair.negative)
            votes[rows, winner] += 1
        return np.argmax(votes, axis=1)


def _fit_binary(params: Svm, x, y_pm, gamma, positive, negative) -> BinarySvm:
    alpha, rho, it, ok = kernels.active().smo(
        x, y_pm, float(params.c), _KERNEL[params.kernel], gamma, float(params.coef0),
        int(params.degree), float(params.tol), int(params.max_iter))
    sv = alpha > 0
    return BinarySvm(positive, negative, np.ascontiguousarray(x[sv]), (alpha * y_pm)[sv], alpha,
                     float(rho), int(it), bool(ok))


def fit_svm_pairwise(params: Svm, train: Dataset) -> SvmModel:
    """One-vs-one soft-margin SVMs over every pair of classes present."""
    n_full = train.n_rows
    if params.max_train is not None and train.n_rows > params.max_train:
        train = random_sample(train, params.max_train, params.seed)
    gamma = params.gamma if params.gamma is not None else 1.0 / max(1, train.n_features)
    present = np.unique(train.labels)
    if len(present) < 2:
        return SvmModel(params, (), gamma, train.n_features, train.n_classes, n_full, int(present[0]))
    pairs = []
    for a_i, a in enumerate(present):
        for b in present[a_i + 1:]:
            mask = (train.labels == a) | (train.labels == b)
            x = np.ascontiguousarray(train.features[mask])
            y_pm = np.where(train.labels[mask] == a, 1.0, -1.0)
            pairs.append(_fit_binary(params, x, y_pm, gamma, int(a), int(b)))
    model = SvmModel(params, tuple(pairs), gamma, train.n_features, train.n_classes, n_full)
    if not model.converged:
        warnings.warn(f"SVM ({params.kernel}) hit the {params.max_iter} iteration cap before converging",
                      ConvergenceWarning, stacklevel=2)
    return model
