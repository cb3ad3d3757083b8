import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parensemble import kernels
from parensemble.classifiers import (
    DTree, DTreeModel, Knn, KnnModel, LeafNode, RForest, SplitNode, Svm, best_split, fit,
    fit_svm_pairwise, forest_merge, gini, kernel_value, knn_neighbors, predict, tree_seed,
)
from parensemble.dataio import make_dataset


def walk(node, row):
    while isinstance(node, SplitNode):
        node = node.left if row[node.feature_index] <= node.threshold else node.right
    return node.class_id


# ---------------------------------------------------------------- fit/predict contract


def test_dtree_single_class_is_leaf(backend):
    d = make_dataset(np.arange(10.0)[:, None], np.zeros(10, dtype=int), n_classes=2)
    m = fit(DTree(), d)
    assert m.root == LeafNode(0, 10)


def test_knn_fit_stores_training_set(blobs):
    d = blobs(50)
    m = fit(Knn(3), d)
    assert isinstance(m, KnnModel)
    assert np.array_equal(m.train_features, d.features) and np.array_equal(m.train_labels, d.labels)


def test_knn_k_larger_than_rows():
    d = make_dataset(np.zeros((3, 1)), [0, 1, 0])
    with pytest.raises(ValueError, match="exceeds"):
        fit(Knn(4), d)


def test_forest_seed_schedule(blobs):
    d = blobs(40)
    m = fit(RForest(130, seed=11), d)
    assert len(m.trees) == 130
    assert m.per_tree_seeds == tuple(tree_seed(11, i) for i in range(130))
    assert len(set(m.per_tree_seeds)) == 130


def test_predict_dimension_mismatch(blobs):
    m = fit(DTree(), blobs(30, n_features=3))
    with pytest.raises(ValueError, match="feature matrix"):
        predict(m, np.zeros((2, 4)))


@pytest.mark.parametrize("params", [Knn(3), DTree(2), RForest(5, 3), Svm("poly")])
def test_fit_predict_deterministic(blobs, params):
    d = blobs(120, sep=1.0)
    a, b = fit(params, d), fit(params, d)
    assert np.array_equal(predict(a, d.features), predict(b, d.features))


# ---------------------------------------------------------------- knn


def test_knn_k1_returns_own_label(backend, blobs):
    d = blobs(60, sep=0.5)
    m = fit(Knn(1), d)
    x = d.features
    # duplicated points would break this; blobs are continuous
    assert np.array_equal(predict(m, x), d.labels)


def test_knn_k_equals_n_is_global_majority(backend):
    d = make_dataset(np.arange(7.0)[:, None], [1, 0, 1, 2, 1, 0, 2], n_classes=3)
    m = fit(Knn(7), d)
    assert predict(m, np.array([[-5.0], [3.3], [100.0]])).tolist() == [1, 1, 1]


def test_knn_majority_tie_takes_smallest_class(backend):
    d = make_dataset(np.array([[0.0], [1.0]]), [1, 0])
    assert predict(fit(Knn(2), d), np.array([[0.0]])).tolist() == [0]


@pytest.mark.parametrize("metric,expected", [("euclidean", 5.0), ("manhattan", 7.0)])
def test_knn_distances(backend, metric, expected):
    d = make_dataset(np.array([[3.0, 4.0]]), [0], n_classes=2)
    assert knn_neighbors(fit(Knn(1, metric), d), [0.0, 0.0]) == [(0, expected)]


@pytest.mark.parametrize("metric", ["euclidean", "manhattan"])
def test_knn_neighbors_match_exhaustive_sort(backend, metric):
    rng = np.random.default_rng(3)
    x = rng.integers(0, 4, size=(10, 2)).astype(float)  # small grid forces distance ties
    d = make_dataset(x, np.arange(10) % 2)
    m = fit(Knn(3, metric), d)
    for q in [[0.0, 0.0], [1.5, 2.0], [3.0, 1.0]]:
        dist = [math.dist(r, q) if metric == "euclidean" else sum(abs(a - b) for a, b in zip(r, q)) for r in x]
        oracle = sorted(range(10), key=lambda i: (dist[i], i))[:3]
        got = knn_neighbors(m, q)
        assert [i for i, _ in got] == oracle
        assert [v for _, v in got] == pytest.approx([dist[i] for i in oracle])


def test_knn_training_permutation_invariance(backend, blobs):
    d = blobs(80, sep=1.0, seed=4)
    perm = np.random.default_rng(0).permutation(80)
    shuffled = make_dataset(d.features[perm], d.labels[perm])
    q = blobs(30, sep=1.0, seed=5).features
    for k in (1, 4, 7):
        assert np.array_equal(predict(fit(Knn(k), d), q), predict(fit(Knn(k), shuffled), q))


# ---------------------------------------------------------------- gini / best_split


def test_gini_values():
    assert gini([10, 0]) == 0.0
    assert gini([5, 5]) == 0.5
    # 1 - (1 + 4 + 9) / 36
    assert gini([1, 2, 3]) == pytest.approx(22 / 36)


@given(st.lists(st.integers(0, 50), min_size=1, max_size=6).filter(lambda c: sum(c) > 0), st.integers(1, 5))
def test_gini_properties(counts, scale):
    g = gini(counts)
    assert 0.0 <= g < 1.0
    assert (g == 0.0) == (sum(1 for c in counts if c) == 1)
    assert gini([c * scale for c in counts]) == pytest.approx(g, abs=1e-12)
    k = len(counts)
    assert g <= 1 - 1 / k + 1e-12


def _exhaustive_split(x, y, min_leaf):
    """All midpoint thresholds, exact rational weighted Gini."""
    n = len(y)
    classes = sorted(set(y.tolist()))

    def g(lab):
        m = len(lab)
        return 1 - sum(Fraction(int((lab == c).sum()), m) ** 2 for c in classes)

    best = (g(y), None)
    cands = []
    for f in range(x.shape[1]):
        vals = sorted(set(x[:, f].tolist()))
        for a, b in zip(vals, vals[1:]):
            t = (a + b) / 2
            left = x[:, f] <= t
            nl = int(left.sum())
            if nl < min_leaf or n - nl < min_leaf:
                continue
            score = Fraction(nl, n) * g(y[left]) + Fraction(n - nl, n) * g(y[~left])
            cands.append((score, f, t))
    improving = [c for c in cands if c[0] < best[0]]
    if not improving:
        return None, {}
    top = min(improving)
    return (top[1], top[2]), {(f, t): s for s, f, t in cands}


def test_best_split_pure_node(backend):
    x = np.arange(4.0)[:, None]
    y = np.zeros(4, dtype=np.int64)
    assert best_split(x, y, np.arange(4), 1, [0], n_classes=2) is None


def test_best_split_1d_example(backend):
    x = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = np.array([0, 0, 1, 1])
    oracle, _ = _exhaustive_split(x, y, 1)
    assert oracle == (0, 2.5)
    assert best_split(x, y, np.arange(4), 1, [0]) == (0, 2.5)


def test_best_split_infeasible_leaf_size(backend):
    x = np.arange(5.0)[:, None]
    y = np.array([0, 1, 0, 1, 0])
    assert best_split(x, y, np.arange(5), 3, [0]) is None


def test_best_split_tie_prefers_lower_feature_then_threshold(backend):
    # features 0 and 1 are copies; the split at 1.5 and at 2.5 on [0,1,1,0]-like data tie
    x = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]])
    assert best_split(x, np.array([0, 0, 1, 1]), np.arange(4), 1, [1, 0]) == (0, 2.5)
    y = np.array([0, 1, 1, 0])
    _, scores = _exhaustive_split(x[:, :1], y, 1)
    assert scores[(0, 1.5)] == scores[(0, 3.5)]
    assert best_split(x, y, np.arange(4), 1, [0, 1]) == (0, 1.5)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_best_split_matches_exhaustive_oracle(seed, min_leaf):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 14))
    x = rng.integers(0, 5, size=(n, 2)).astype(float)
    y = rng.integers(0, 3, size=n)
    oracle, scores = _exhaustive_split(x, y, min_leaf)
    for name in ("numpy", "numba") if kernels.numba_available() else ("numpy",):
        prev = kernels.set_backend(name)
        try:
            got = best_split(x, y, np.arange(n), min_leaf, [0, 1], n_classes=3)
        finally:
            kernels.set_backend(prev)
        if oracle is None:
            assert got is None
        else:
            # float scoring may break an exact rational tie differently; the
            # chosen split must still be optimal
            assert got is not None and scores[got] == scores[oracle]


# ---------------------------------------------------------------- decision tree


def test_fully_grown_tree_fits_training_rows(backend):
    rng = np.random.default_rng(8)
    x = rng.normal(size=(20, 3))
    y = (x[:, 0] + x[:, 1] > 0).astype(int)
    m = fit(DTree(1, None), make_dataset(x, y))
    root = m.root
    walked = [walk(root, r) for r in x]
    assert walked == y.tolist()
    assert predict(m, x).tolist() == walked


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.one_of(st.none(), st.integers(1, 6)))
def test_tree_invariants(seed, min_leaf, max_depth):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 80))
    x = rng.normal(size=(n, 3)).round(1)
    y = rng.integers(0, 3, size=n)
    m = fit(DTree(min_leaf, max_depth), make_dataset(x, y, 3))
    leaves = m.leaves()
    assert (m.n_samples[leaves] >= min(min_leaf, n)).all()
    if max_depth is not None:
        assert m.max_leaf_depth <= max_depth
    for i in np.flatnonzero(m.left != -1):
        l, r = m.left[i], m.right[i]
        weighted = (m.n_samples[l] * m.impurity[l] + m.n_samples[r] * m.impurity[r]) / m.n_samples[i]
        assert weighted <= m.impurity[i] + 1e-12
        assert m.n_samples[l] + m.n_samples[r] == m.n_samples[i]


def test_backends_grow_identical_trees(blobs):
    if not kernels.numba_available():
        pytest.skip("numba missing")
    d = blobs(300, n_features=5, sep=1.0, seed=2)
    grown = {}
    for name in ("numpy", "numba"):
        prev = kernels.set_backend(name)
        try:
            grown[name] = (fit(DTree(3), d), fit(RForest(8, 5), d))
        finally:
            kernels.set_backend(prev)
    a, b = grown["numpy"], grown["numba"]
    for field in ("feature", "threshold", "left", "right", "value"):
        assert np.array_equal(getattr(a[0], field), getattr(b[0], field))
    assert np.array_equal(a[1].predict(d.features), b[1].predict(d.features))


# ---------------------------------------------------------------- forest


def test_forest_merge_64_66(blobs):
    d = blobs(60, sep=1.0)
    merged = forest_merge([fit(RForest(64, 9, 0), d), fit(RForest(66, 9, 64), d)])
    assert len(merged.trees) == 130


def test_forest_merge_self_keeps_predictions(blobs):
    d = blobs(80, sep=0.7, seed=6)
    m = fit(RForest(7, 2), d)
    assert np.array_equal(forest_merge([m, m]).predict(d.features), m.predict(d.features))


def test_forest_merge_equals_serial_forest(blobs):
    d = blobs(150, sep=0.8, seed=7)
    q = blobs(100, sep=0.8, seed=8).features
    whole = fit(RForest(130, 21), d)
    merged = forest_merge([fit(RForest(64, 21, 0), d), fit(RForest(66, 21, 64), d)])
    assert merged.per_tree_seeds == whole.per_tree_seeds
    assert np.array_equal(merged.vote_counts(q), whole.vote_counts(q))
    assert np.array_equal(merged.predict(q), whole.predict(q))


@settings(max_examples=10, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=1, max_size=4))
def test_forest_merge_any_partition(sizes):
    from parensemble.synth import synthetic_arrays
    x, y = synthetic_arrays(60, 3, 2, 1.0, 3)
    d = make_dataset(x, y)
    parts, first = [], 0
    for s in sizes:
        parts.append(fit(RForest(s, 4, first), d))
        first += s
    whole = fit(RForest(first, 4), d)
    assert np.array_equal(forest_merge(parts).predict(x), whole.predict(x))


def test_forest_merge_dimension_mismatch(blobs):
    a = fit(RForest(2, 1), blobs(30, n_features=3))
    b = fit(RForest(2, 1, 2), blobs(30, n_features=4))
    with pytest.raises(ValueError, match="features"):
        forest_merge([a, b])


# ---------------------------------------------------------------- svm


def test_linear_kernel_value():
    assert kernel_value(Svm("linear"), [1, 2], [3, 4]) == 11.0


def test_poly_and_sigmoid_kernel_values():
    p = Svm("poly", gamma=0.5, coef0=1.0, degree=2)
    assert kernel_value(p, [1, 2], [3, 4]) == pytest.approx((0.5 * 11 + 1) ** 2)
    s = Svm("sigmoid", gamma=0.1, coef0=-1.0)
    assert kernel_value(s, [1, 2], [3, 4]) == pytest.approx(math.tanh(0.1 * 11 - 1))


def test_linear_separable_training_accuracy(backend):
    rng = np.random.default_rng(0)
    x = np.column_stack([np.r_[rng.uniform(-3, -0.5, 30), rng.uniform(0.5, 3, 30)], rng.normal(size=60)])
    y = (x[:, 0] > 0).astype(int)
    m = fit(Svm("linear"), make_dataset(x, y))
    assert m.converged
    assert (predict(m, x) == y).mean() == 1.0


def two_moons(n, noise, seed):
    rng = np.random.default_rng(seed)
    n_out = n // 2
    t_out = np.linspace(0, np.pi, n_out)
    t_in = np.linspace(0, np.pi, n - n_out)
    x = np.r_[np.c_[np.cos(t_out), np.sin(t_out)], np.c_[1 - np.cos(t_in), 1 - np.sin(t_in) - 0.5]]
    x += rng.normal(scale=noise, size=x.shape)
    y = np.r_[np.zeros(n_out, dtype=int), np.ones(n - n_out, dtype=int)]
    return x, y


def qp_oracle(x, y, params: Svm):
    """Solve the soft-margin dual directly with cvxopt."""
    cvxopt = pytest.importorskip("cvxopt")
    from cvxopt import matrix, solvers

    gamma = params.gamma or 1.0 / x.shape[1]
    kern = (gamma * x @ x.T + params.coef0) ** params.degree
    ys = np.where(y == 0, 1.0, -1.0)
    n = len(ys)
    q = np.outer(ys, ys) * kern
    solvers.options["show_progress"] = False
    sol = solvers.qp(matrix(q), matrix(-np.ones(n)), matrix(np.r_[-np.eye(n), np.eye(n)]),
                     matrix(np.r_[np.zeros(n), np.full(n, params.c)]), matrix(ys[None, :]), matrix(0.0))
    a = np.array(sol["x"]).ravel()
    free = (a > 1e-6) & (a < params.c - 1e-6)
    b = np.mean(ys[free] - (a * ys) @ kern[:, free])
    decision = (a * ys) @ kern + b
    pred = np.where(decision > 0, 0, 1)
    obj = 0.5 * a @ q @ a - a.sum()
    return pred, obj, ys, q


def test_svm_two_moons_poly_matches_qp_oracle(backend):
    x, y = two_moons(40, 0.15, 1)
    params = Svm("poly", degree=3)
    m = fit_svm_pairwise(params, make_dataset(x, y))
    oracle_pred, oracle_obj, ys, q = qp_oracle(x, y, params)
    ours = (predict(m, x) == y).mean()
    theirs = (oracle_pred == y).mean()
    assert abs(ours - theirs) <= 0.02
    a = m.pairs[0].alpha
    our_obj = 0.5 * a @ q @ a - a.sum()
    assert our_obj == pytest.approx(oracle_obj, rel=1e-2, abs=1e-3)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["linear", "poly", "sigmoid"]), st.sampled_from([0.1, 1.0, 10.0]))
def test_svm_alphas_within_box(seed, kernel, c):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(40, 3))
    y = rng.integers(0, 3, size=40)
    y[:3] = [0, 1, 2]
    m = fit_svm_pairwise(Svm(kernel, c=c), make_dataset(x, y, 3))
    assert len(m.pairs) == 3
    for p in m.pairs:
        if p.converged:
            assert (p.alpha >= -1e-3).all() and (p.alpha <= c + 1e-3).all()


def test_svm_iteration_cap_flags_model():
    x, y = two_moons(60, 0.3, 2)
    with pytest.warns(UserWarning, match="iteration cap"):
        m = fit_svm_pairwise(Svm("poly", max_iter=3), make_dataset(x, y))
    assert not m.converged
    assert predict(m, x).shape == (60,)


def test_svm_subsamples_large_training_sets(blobs):
    d = blobs(300, sep=4.0)
    m = fit(Svm("linear", max_train=50, seed=1), d)
    assert m.n_train == 300
    assert sum(len(p.alpha) for p in m.pairs) == 50
    assert (predict(m, d.features) == d.labels).mean() > 0.95


def test_svm_backends_agree(blobs):
    if not kernels.numba_available():
        pytest.skip("numba missing")
    d = blobs(150, sep=1.5, seed=3)
    out = {}
    for name in ("numpy", "numba"):
        prev = kernels.set_backend(name)
        try:
            out[name] = [predict(fit(Svm(k), d), d.features) for k in ("linear", "poly", "sigmoid")]
        finally:
            kernels.set_backend(prev)
    for a, b in zip(out["numpy"], out["numba"]):
        assert (a == b).mean() >= 0.99
