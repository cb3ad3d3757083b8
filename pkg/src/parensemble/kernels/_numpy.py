"""Pure-numpy counterparts of the compiled kernels.

Same signatures and tie rules as ``_numba``. Distances and split scores are
accumulated in the same order, so KNN and tree results match bit for bit;
the SVM uses BLAS dot products and can differ in the last few ulps.
"""
import numpy as np

EUCLIDEAN = 0
MANHATTAN = 1

LINEAR = 0
POLY = 1
SIGMOID = 2

TAU = 1e-12
IMPROVE_RTOL = 1e-12

_CHUNK_CELLS = 1 << 22


def _distances(train_x, queries, metric):
    acc = np.zeros((queries.shape[0], train_x.shape[0]))
    for j in range(train_x.shape[1]):
        d = queries[:, j, None] - train_x[None, :, j]
        if metric == EUCLIDEAN:
            acc += d * d
        else:
            acc += np.abs(d)
    return acc


def _topk_rows(dist, k):
    kth = np.partition(dist, k - 1, axis=1)[:, k - 1]
    out = np.empty((dist.shape[0], k), dtype=np.int64)
    for r in range(dist.shape[0]):
        cand = np.flatnonzero(dist[r] <= kth[r])
        order = np.argsort(dist[r, cand], kind="stable")[:k]
        out[r] = cand[order]
    return out


def knn_topk(train_x, query, k, metric):
    dist = _distances(train_x, query[None, :], metric)
    idx = _topk_rows(dist, k)[0]
    return idx, dist[0, idx]


def knn_predict(train_x, train_y, queries, k, metric, n_classes):
    out = np.empty(queries.shape[0], dtype=np.int64)
    step = max(1, _CHUNK_CELLS // max(1, train_x.shape[0]))
    for lo in range(0, queries.shape[0], step):
        q = queries[lo:lo + step]
        idx = _topk_rows(_distances(train_x, q, metric), k)
        labels = train_y[idx]
        counts = np.zeros((len(q), n_classes), dtype=np.int64)
        np.add.at(counts, (np.arange(len(q))[:, None], labels), 1)
        out[lo:lo + step] = np.argmax(counts, axis=1)
    return out


def best_split(x, y, idx, features, n_classes, min_leaf):
    n = idx.shape[0]
    labels = y[idx]
    total = np.bincount(labels, minlength=n_classes).astype(np.int64)
    parent_sq = int((total * total).sum())
    best_score = (parent_sq / n) * (1.0 + IMPROVE_RTOL)
    best_f, best_t = -1, 0.0
    if n < 2 * min_leaf:
        return best_f, best_t
    nl = np.arange(1, n, dtype=np.int64)
    nr = n - nl
    size_ok = (nl >= min_leaf) & (nr >= min_leaf)
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    for f in features:
        vals = x[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        onehot[:] = 0
        onehot[np.arange(n), labels[order]] = 1
        left = np.cumsum(onehot, axis=0)[:-1]
        right = total - left
        lsq = (left * left).sum(axis=1)
        rsq = (right * right).sum(axis=1)
        ok = size_ok & (sv[:-1] != sv[1:])
        if not ok.any():
            continue
        score = np.where(ok, lsq / nl + rsq / nr, -np.inf)
        a = int(np.argmax(score))
        if score[a] > best_score:
            best_score = score[a]
            best_f = int(f)
            v, vn = sv[a], sv[a + 1]
            t = (v + vn) / 2.0
            best_t = float(v if t >= vn else t)
    return best_f, best_t


def tree_apply(feature, threshold, left, right, x):
    node = np.zeros(x.shape[0], dtype=np.int64)
    active = left[node] != -1
    while active.any():
        rows = np.flatnonzero(active)
        cur = node[rows]
        go_left = x[rows, feature[cur]] <= threshold[cur]
        node[rows] = np.where(go_left, left[cur], right[cur])
        active[rows] = left[node[rows]] != -1
    return node


def kernel_matrix(a, b, kind, gamma, coef0, degree):
    dot = a @ b.T
    if kind == LINEAR:
        return dot
    if kind == POLY:
        return (gamma * dot + coef0) ** degree
    return np.tanh(gamma * dot + coef0)


def smo(x, y, c, kind, gamma, coef0, degree, tol, max_iter):
    n = x.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)
    qd = np.array([kernel_matrix(x[t:t + 1], x[t:t + 1], kind, gamma, coef0, degree)[0, 0] for t in range(n)])
    pos = y > 0
    it = 0
    converged = False
    while it < max_iter:
        v = -y * grad
        up = (pos & (alpha < c)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < c))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, v, -np.inf)))
        j = int(np.argmin(np.where(low, v, np.inf)))
        if v[i] - v[j] < tol:
            converged = True
            break
        it += 1
        ki = kernel_matrix(x, x[i:i + 1], kind, gamma, coef0, degree)[:, 0]
        kj = kernel_matrix(x, x[j:j + 1], kind, gamma, coef0, degree)[:, 0]
        ai, aj = alpha[i], alpha[j]
        qij = y[i] * y[j] * ki[j]
        if y[i] != y[j]:
            quad = qd[i] + qd[j] + 2.0 * qij
            if quad <= 0:
                quad = TAU
            delta = (-grad[i] - grad[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > c:
                    ni, nj = c, c - diff
            elif nj > c:
                nj, ni = c, c + diff
        else:
            quad = qd[i] + qd[j] - 2.0 * qij
            if quad <= 0:
                quad = TAU
            delta = (grad[i] - grad[j]) / quad
            s = ai + aj
            ni, nj = ai - delta, aj + delta
            if s > c:
                if ni > c:
                    ni, nj = c, s - c
            elif nj < 0:
                nj, ni = 0.0, s
            if s > c:
                if nj > c:
                    nj, ni = c, s - c
            elif ni < 0:
                ni, nj = 0.0, s
        alpha[i], alpha[j] = ni, nj
        grad += y * (y[i] * ki * (ni - ai) + y[j] * kj * (nj - aj))

    yg = y * grad
    at_ub = alpha >= c
    at_lb = alpha <= 0
    free = ~at_ub & ~at_lb
    if free.any():
        rho = float(yg[free].mean())
    else:
        ub_mask = (at_ub & ~pos) | (at_lb & pos)
        lb_mask = (at_ub & pos) | (at_lb & ~pos)
        ub = yg[ub_mask].min() if ub_mask.any() else np.inf
        lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
        rho = (ub + lb) / 2.0
    return alpha, rho, it, converged


def svm_decision(sv, coef, rho, queries, kind, gamma, coef0, degree):
    out = np.empty(queries.shape[0])
    step = max(1, _CHUNK_CELLS // max(1, sv.shape[0]))
    for lo in range(0, queries.shape[0], step):
        out[lo:lo + step] = kernel_matrix(queries[lo:lo + step], sv, kind, gamma, coef0, degree) @ coef - rho
    return out
