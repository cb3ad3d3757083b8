"""Majority-vote combination of per-configuration predictions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class EnsembleResult:
    predictions: np.ndarray
    vote_counts: np.ndarray  # (n_samples, n_classes)
    n_voters: int

    def __eq__(self, other):
        if not isinstance(other, EnsembleResult):
            return NotImplemented
        return (self.n_voters == other.n_voters
                and np.array_equal(self.predictions, other.predictions)
                and np.array_equal(self.vote_counts, other.vote_counts))


def _from_counts(counts: np.ndarray, n_voters: int) -> EnsembleResult:
    # argmax returns the first maximum, i.e. the smallest class id on ties
    return EnsembleResult(np.argmax(counts, axis=1).astype(np.int64), counts, n_voters)


def _check_lengths(results) -> int:
    ref = min(results, key=lambda r: r.config_id)
    n = len(ref.predictions)
    for r in sorted(results, key=lambda r: r.config_id):
        if len(r.predictions) != n:
            raise ValueError(f"config {r.config_id} has {len(r.predictions)} predictions, expected {n}")
    return n


def majority_vote(results: Sequence, n_classes: int) -> EnsembleResult:
    """Plurality vote over ``results`` (anything with config_id and predictions)."""
    if not results:
        raise ValueError("majority_vote needs at least one voter")
    n = _check_lengths(results)
    counts = np.zeros((n, n_classes), dtype=np.int64)
    rows = np.arange(n)
    for r in results:
        p = np.asarray(r.predictions, dtype=np.int64)
        if len(p) and (p.min() < 0 or p.max() >= n_classes):
            raise ValueError(f"config {r.config_id} predicts a class outside 0..{n_classes - 1}")
        np.add.at(counts, (rows, p), 1)
    return _from_counts(counts, len(results))


def forest_vote(results: Sequence, n_classes: int) -> EnsembleResult:
    """Pool the per-tree tallies of forest slices into one forest-level vote.

    Forest slices are not re-voted as individual models: summing their tree
    votes gives exactly what the merged forest would predict.
    """
    if not results:
        raise ValueError("forest_vote needs at least one forest slice")
    n = _check_lengths(results)
    counts = np.zeros((n, n_classes), dtype=np.int64)
    for r in results:
        if r.votes is None:
            raise ValueError(f"config {r.config_id} carries no tree votes")
        counts += r.votes
    n_trees = int(counts[0].sum()) if n else 0
    return _from_counts(counts, n_trees)


def combine(results: Sequence, n_classes: int) -> EnsembleResult:
    if results and all(getattr(r, "votes", None) is not None for r in results):
        return forest_vote(results, n_classes)
    return majority_vote(results, n_classes)
