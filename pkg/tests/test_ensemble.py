from collections import Counter
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parensemble.classifiers import RForest, fit, forest_merge
from parensemble.ensemble import EnsembleResult, combine, forest_vote, majority_vote


def voter(cid, preds, votes=None):
    return SimpleNamespace(config_id=cid, predictions=np.asarray(preds), votes=votes)


def test_simple_majority():
    res = majority_vote([voter(0, [0, 1, 1]), voter(1, [0, 0, 1]), voter(2, [1, 0, 1])], 2)
    assert res.predictions.tolist() == [0, 0, 1]
    assert res.vote_counts.tolist() == [[2, 1], [2, 1], [0, 3]]
    assert res.n_voters == 3


def test_tie_goes_to_smallest_class():
    res = majority_vote([voter(0, [2, 1]), voter(1, [1, 2])], 3)
    assert res.predictions.tolist() == [1, 1]


def test_length_mismatch_names_config():
    with pytest.raises(ValueError, match="config 3"):
        majority_vote([voter(0, [0, 1]), voter(3, [0])], 2)


def test_empty_vote():
    with pytest.raises(ValueError):
        majority_vote([], 2)


@given(st.lists(st.lists(st.integers(0, 3), min_size=5, max_size=5), min_size=1, max_size=9), st.randoms())
def test_vote_matches_counter_and_ignores_order(table, rnd):
    voters = [voter(i, row) for i, row in enumerate(table)]
    res = majority_vote(voters, 4)
    for j in range(5):
        c = Counter(row[j] for row in table)
        top = max(c.values())
        assert res.predictions[j] == min(k for k, v in c.items() if v == top)
    rnd.shuffle(voters)
    assert majority_vote(voters, 4) == res


def test_forest_vote_equals_merged_forest(blobs):
    d = blobs(90, sep=0.6, seed=3)
    a, b = fit(RForest(5, 2, 0), d), fit(RForest(6, 2, 5), d)
    slices = [voter(0, a.predict(d.features), a.vote_counts(d.features)),
              voter(1, b.predict(d.features), b.vote_counts(d.features))]
    res = combine(slices, 2)
    assert res.n_voters == 11
    assert np.array_equal(res.predictions, forest_merge([a, b]).predict(d.features))
    assert res == forest_vote(slices, 2)


def test_combine_without_votes_is_majority():
    vs = [voter(0, [1, 0]), voter(1, [1, 1]), voter(2, [0, 1])]
    assert combine(vs, 2) == majority_vote(vs, 2)


def test_result_equality():
    a = EnsembleResult(np.array([0]), np.array([[1, 0]]), 1)
    assert a == EnsembleResult(np.array([0]), np.array([[1, 0]]), 1)
    assert a != EnsembleResult(np.array([0]), np.array([[2, 0]]), 2)


def test_single_voter_is_identity():
    assert majority_vote([voter(0, [2, 0, 1])], 3).predictions.tolist() == [2, 0, 1]


def test_unanimous_row_counts():
    res = majority_vote([voter(i, [1]) for i in range(3)], 2)
    assert res.predictions.tolist() == [1]
    assert res.vote_counts.tolist() == [[0, 3]]


@given(st.lists(st.lists(st.integers(0, 2), min_size=4, max_size=4), min_size=1, max_size=6))
def test_duplicating_voters_keeps_predictions(table):
    voters = [voter(i, row) for i, row in enumerate(table)]
    doubled = voters + [voter(i + len(voters), v.predictions) for i, v in enumerate(voters)]
    res, res2 = majority_vote(voters, 3), majority_vote(doubled, 3)
    assert np.array_equal(res.predictions, res2.predictions)
    assert (res.vote_counts.sum(axis=1) == len(table)).all()
