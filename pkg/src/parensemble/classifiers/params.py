from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

KNN_METRICS = ("euclidean", "manhattan")
SVM_KERNELS = ("linear", "poly", "sigmoid")


@dataclass(frozen=True)
class Knn:
    k: int
    metric: str = "euclidean"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.metric not in KNN_METRICS:
            raise ValueError(f"metric must be one of {KNN_METRICS}, got {self.metric!r}")

    @property
    def label(self) -> str:
        return f"k={self.k}" if self.metric == "euclidean" else f"k={self.k},{self.metric}"


@dataclass(frozen=True)
class Svm:
    """Soft-margin kernel SVM.

    ``gamma=None`` resolves to 1/n_features at fit time. Training sets larger
    than ``max_train`` are subsampled with ``seed``.
    """

    kernel: str
    c: float = 1.0
    degree: int = 3
    gamma: Optional[float] = None
    coef0: float = 0.0
    max_train: Optional[int] = 10_000
    seed: int = 0
    tol: float = 1e-3
    max_iter: int = 200_000

    def __post_init__(self):
        if self.kernel not in SVM_KERNELS:
            raise ValueError(f"kernel must be one of {SVM_KERNELS}, got {self.kernel!r}")
        if not self.c > 0:
            raise ValueError("c must be > 0")
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if self.max_train is not None and self.max_train < 2:
            raise ValueError("max_train must be >= 2")

    @property
    def label(self) -> str:
        return f"kernel={self.kernel}"


@dataclass(frozen=True)
class DTree:
    min_samples_leaf: int = 1
    max_depth: Optional[int] = None

    def __post_init__(self):
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1 or None")

    @property
    def label(self) -> str:
        parts = []
        if self.min_samples_leaf != 1 or self.max_depth is None:
            parts.append(f"leaf={self.min_samples_leaf}")
        if self.max_depth is not None:
            parts.append(f"depth={self.max_depth}")
        return ",".join(parts)


@dataclass(frozen=True)
class RForest:
    """A forest, or one slice of a forest.

    Tree ``i`` of the slice draws its randomness from ``mix(seed, first_tree + i)``,
    so slices covering disjoint index ranges merge into exactly the forest a
    single ``RForest(total, seed)`` would have grown.
    """

    n_trees: int
    seed: int = 0
    first_tree: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.first_tree < 0:
            raise ValueError("first_tree must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")

    @property
    def label(self) -> str:
        return f"trees={self.first_tree}..{self.first_tree + self.n_trees - 1}"


HyperParams = Union[Knn, Svm, DTree, RForest]

ALGORITHMS = {"knn": Knn, "svm": Svm, "dtree": DTree, "rforest": RForest}


def algorithm_of(params: HyperParams) -> str:
    for name, cls in ALGORITHMS.items():
        if isinstance(params, cls):
            return name
    raise TypeError(f"not a hyperparameter set: {params!r}")
