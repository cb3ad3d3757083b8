"""CART-style decision tree (Gini, midpoint thresholds) and a bagged forest of them."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .. import _rng, kernels
from ..dataio import Dataset
from .params import DTree, RForest


def gini(counts) -> float:
    c = np.asarray(counts, dtype=np.float64)
    n = c.sum()
    if n <= 0:
        raise ValueError("gini needs at least one sample")
    p = c / n
    return float(1.0 - (p * p).sum())


def best_split(x: np.ndarray, y: np.ndarray, rows, min_samples_leaf: int,
               candidate_features: Sequence[int], n_classes: Optional[int] = None):
    """Gini-optimal ``(feature_index, threshold)`` over ``rows``, or None.

    Ties go to the lower feature index, then the lower threshold.
    """
    rows = np.asarray(rows, dtype=np.int64)
    if len(rows) == 0:
        raise ValueError("best_split needs at least one row")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    feats = np.sort(np.asarray(candidate_features, dtype=np.int64))
    f, t = kernels.active().best_split(x, y, rows, feats, n_classes, min_samples_leaf)
    if f < 0:
        return None
    return int(f), float(t)


@dataclass(frozen=True)
class LeafNode:
    class_id: int
    n_samples: int


@dataclass(frozen=True)
class SplitNode:
    feature_index: int
    threshold: float
    left: "Node"
    right: "Node"


Node = Union[LeafNode, SplitNode]


@dataclass(frozen=True)
class DTreeModel:
    """Flat-array tree; node 0 is the root and ``left == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    depth: np.ndarray
    impurity: np.ndarray
    n_features: int
    n_classes: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def max_leaf_depth(self) -> int:
        return int(self.depth.max())

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.left == -1)

    def node(self, i: int = 0) -> Node:
        if self.left[i] == -1:
            return LeafNode(int(self.value[i]), int(self.n_samples[i]))
        return SplitNode(int(self.feature[i]), float(self.threshold[i]),
                         self.node(int(self.left[i])), self.node(int(self.right[i])))

    @property
    def root(self) -> Node:
        return self.node(0)

    def apply(self, features: np.ndarray) -> np.ndarray:
        return kernels.active().tree_apply(self.feature, self.threshold, self.left, self.right, features)

    def predict(self, features: np.ndarray) -> np.ndarray:
        return self.value[self.apply(features)]


def grow_tree(x: np.ndarray, y: np.ndarray, n_classes: int, rows: np.ndarray,
              min_samples_leaf: int = 1, max_depth: Optional[int] = None,
              rng: Optional[np.random.Generator] = None,
              max_features: Optional[int] = None) -> DTreeModel:
    """Grow depth-first. With ``rng`` each split sees a random subset of
    ``max_features`` candidate features."""
    n_feat = x.shape[1]
    all_feats = np.arange(n_feat, dtype=np.int64)
    k = kernels.active()
    feature, threshold, left, right, value, n_samp, depth, imp = [], [], [], [], [], [], [], []

    def new_node(node_rows, d):
        counts = np.bincount(y[node_rows], minlength=n_classes)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(int(np.argmax(counts)))
        n_samp.append(len(node_rows))
        depth.append(d)
        imp.append(gini(counts))
        return len(feature) - 1, counts

    root, root_counts = new_node(rows, 0)
    stack = [(root, rows, 0, root_counts)]
    while stack:
        node, node_rows, d, counts = stack.pop()
        if (max_depth is not None and d >= max_depth) or np.count_nonzero(counts) < 2:
            continue
        if len(node_rows) < 2 * min_samples_leaf:
            continue
        if rng is not None and max_features is not None and max_features < n_feat:
            feats = np.sort(rng.choice(n_feat, max_features, replace=False)).astype(np.int64)
        else:
            feats = all_feats
        f, t = k.best_split(x, y, node_rows, feats, n_classes, min_samples_leaf)
        if f < 0:
            continue
        go_left = x[node_rows, f] <= t
        lrows, rrows = node_rows[go_left], node_rows[~go_left]
        li, lc = new_node(lrows, d + 1)
        ri, rc = new_node(rrows, d + 1)
        feature[node], threshold[node], left[node], right[node] = int(f), float(t), li, ri
        # right pushed first so the left subtree is expanded first
        stack.append((ri, rrows, d + 1, rc))
        stack.append((li, lrows, d + 1, lc))

    i64 = lambda v: np.asarray(v, dtype=np.int64)
    return DTreeModel(i64(feature), np.asarray(threshold, dtype=np.float64), i64(left), i64(right),
                      i64(value), i64(n_samp), i64(depth), np.asarray(imp), n_feat, n_classes)


def fit_dtree(params: DTree, train: Dataset) -> DTreeModel:
    rows = np.arange(train.n_rows, dtype=np.int64)
    return grow_tree(train.features, train.labels, train.n_classes, rows,
                     params.min_samples_leaf, params.max_depth)


# ---------------------------------------------------------------- forest


def tree_seed(seed: int, tree_index: int) -> int:
    return _rng.mix(seed, tree_index)


@dataclass(frozen=True)
class RForestModel:
    trees: tuple[DTreeModel, ...]
    per_tree_seeds: tuple[int, ...]
    params: RForest
    n_features: int
    n_classes: int

    def vote_counts(self, features: np.ndarray) -> np.ndarray:
        counts = np.zeros((features.shape[0], self.n_classes), dtype=np.int64)
        rows = np.arange(features.shape[0])
        for tree in self.trees:
            counts[rows, tree.predict(features)] += 1
        return counts

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.argmax(self.vote_counts(features), axis=1)


def fit_rforest(params: RForest, train: Dataset) -> RForestModel:
    """Bootstrap rows and sqrt(n_features) candidate features per split, per tree."""
    n = train.n_rows
    max_features = max(1, math.isqrt(train.n_features))
    trees, seeds = [], []
    for t in range(params.first_tree, params.first_tree + params.n_trees):
        s = tree_seed(params.seed, t)
        rng = _rng.generator(s)
        boot = np.sort(rng.integers(0, n, size=n)).astype(np.int64)
        trees.append(grow_tree(train.features, train.labels, train.n_classes, boot,
                               rng=rng, max_features=max_features))
        seeds.append(s)
    return RForestModel(tuple(trees), tuple(seeds), params, train.n_features, train.n_classes)


def forest_merge(parts: Sequence[RForestModel]) -> RForestModel:
    if not parts:
        raise ValueError("nothing to merge")
    first = parts[0]
    for p in parts[1:]:
        if p.n_features != first.n_features:
            raise ValueError(f"cannot merge forests over {first.n_features} and {p.n_features} features")
        if p.n_classes != first.n_classes:
            raise ValueError("cannot merge forests with different class counts")
    trees = tuple(t for p in parts for t in p.trees)
    seeds = tuple(s for p in parts for s in p.per_tree_seeds)
    lo = min(p.params.first_tree for p in parts)
    params = RForest(len(trees), first.params.seed, lo)
    return RForestModel(trees, seeds, params, first.n_features, first.n_classes)
