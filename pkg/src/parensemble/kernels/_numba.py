"""numba-compiled inner loops. Every kernel is nogil so a thread pool runs them in parallel."""
import numpy as np
from numba import njit

EUCLIDEAN = 0
MANHATTAN = 1

LINEAR = 0
POLY = 1
SIGMOID = 2

TAU = 1e-12
IMPROVE_RTOL = 1e-12


@njit(nogil=True, cache=True)
def _dist(a, ia, b, metric):
    acc = 0.0
    if metric == EUCLIDEAN:
        for j in range(b.shape[0]):
            d = a[ia, j] - b[j]
            acc += d * d
    else:
        for j in range(b.shape[0]):
            acc += abs(a[ia, j] - b[j])
    return acc


@njit(nogil=True, cache=True)
def knn_topk(train_x, query, k, metric):
    """Indices and ranking distances of the k nearest rows, ties to lower index.

    Euclidean ranking distances are squared.
    """
    best_d = np.full(k, np.inf)
    best_i = np.full(k, -1, dtype=np.int64)
    filled = 0
    for i in range(train_x.shape[0]):
        d = _dist(train_x, i, query, metric)
        if filled == k and not d < best_d[k - 1]:
            continue
        pos = filled if filled < k else k - 1
        while pos > 0 and best_d[pos - 1] > d:
            best_d[pos] = best_d[pos - 1]
            best_i[pos] = best_i[pos - 1]
            pos -= 1
        best_d[pos] = d
        best_i[pos] = i
        if filled < k:
            filled += 1
    return best_i, best_d


@njit(nogil=True, cache=True)
def knn_predict(train_x, train_y, queries, k, metric, n_classes):
    out = np.empty(queries.shape[0], dtype=np.int64)
    counts = np.zeros(n_classes, dtype=np.int64)
    for q in range(queries.shape[0]):
        idx, _ = knn_topk(train_x, queries[q], k, metric)
        counts[:] = 0
        for i in idx:
            counts[train_y[i]] += 1
        out[q] = np.argmax(counts)
    return out


@njit(nogil=True, cache=True)
def best_split(x, y, idx, features, n_classes, min_leaf):
    """Best (feature, threshold) by weighted Gini, or feature -1 if no split helps.

    Maximises sum over children of sum(c**2)/n_child, which is equivalent to
    minimising weighted child Gini.
    """
    n = idx.shape[0]
    total = np.zeros(n_classes, dtype=np.int64)
    for a in range(n):
        total[y[idx[a]]] += 1
    parent_sq = 0
    for c in range(n_classes):
        parent_sq += total[c] * total[c]
    best_score = (parent_sq / n) * (1.0 + IMPROVE_RTOL)
    best_f = -1
    best_t = 0.0
    if n < 2 * min_leaf:
        return best_f, best_t

    vals = np.empty(n)
    labs = np.empty(n, dtype=np.int64)
    left = np.empty(n_classes, dtype=np.int64)
    right = np.empty(n_classes, dtype=np.int64)
    for f in features:
        for a in range(n):
            vals[a] = x[idx[a], f]
            labs[a] = y[idx[a]]
        order = np.argsort(vals, kind="mergesort")
        left[:] = 0
        right[:] = total
        lsq = 0
        rsq = parent_sq
        for a in range(n - 1):
            c = labs[order[a]]
            lsq += 2 * left[c] + 1
            left[c] += 1
            rsq -= 2 * right[c] - 1
            right[c] -= 1
            nl = a + 1
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            v = vals[order[a]]
            vn = vals[order[a + 1]]
            if v == vn:
                continue
            score = lsq / nl + rsq / nr
            if score > best_score:
                best_score = score
                best_f = f
                t = (v + vn) / 2.0
                best_t = v if t >= vn else t
    return best_f, best_t


@njit(nogil=True, cache=True)
def tree_apply(feature, threshold, left, right, x):
    out = np.empty(x.shape[0], dtype=np.int64)
    for r in range(x.shape[0]):
        node = 0
        while left[node] != -1:
            if x[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = node
    return out


@njit(nogil=True, cache=True)
def _kernel(a, ia, b, ib, kind, gamma, coef0, degree):
    # rows are indexed, not sliced: views in a hot loop cost refcount traffic
    dot = 0.0
    for j in range(a.shape[1]):
        dot += a[ia, j] * b[ib, j]
    if kind == LINEAR:
        return dot
    if kind == POLY:
        return (gamma * dot + coef0) ** degree
    return np.tanh(gamma * dot + coef0)


@njit(nogil=True, cache=True)
def kernel_matrix(a, b, kind, gamma, coef0, degree):
    out = np.empty((a.shape[0], b.shape[0]))
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            out[i, j] = _kernel(a, i, b, j, kind, gamma, coef0, degree)
    return out


@njit(nogil=True, cache=True)
def smo(x, y, c, kind, gamma, coef0, degree, tol, max_iter):
    """Binary soft-margin dual via SMO with maximal-violating-pair selection.

    y holds +1/-1. Returns (alpha, rho, iterations, converged); the decision
    function is sum(alpha*y*K(sv, x)) - rho.
    """
    n = x.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)
    qd = np.empty(n)
    for t in range(n):
        qd[t] = _kernel(x, t, x, t, kind, gamma, coef0, degree)
    ki = np.empty(n)
    kj = np.empty(n)
    it = 0
    converged = False
    while it < max_iter:
        gmax = -np.inf
        gmin = np.inf
        i = -1
        j = -1
        for t in range(n):
            v = -y[t] * grad[t]
            up = (y[t] > 0 and alpha[t] < c) or (y[t] < 0 and alpha[t] > 0)
            low = (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < c)
            if up and v > gmax:
                gmax = v
                i = t
            if low and v < gmin:
                gmin = v
                j = t
        if i == -1 or j == -1 or gmax - gmin < tol:
            converged = True
            break
        it += 1
        for t in range(n):
            ki[t] = _kernel(x, i, x, t, kind, gamma, coef0, degree)
            kj[t] = _kernel(x, j, x, t, kind, gamma, coef0, degree)
        old_ai = alpha[i]
        old_aj = alpha[j]
        qij = y[i] * y[j] * ki[j]
        if y[i] != y[j]:
            quad = qd[i] + qd[j] + 2.0 * qij
            if quad <= 0:
                quad = TAU
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = c - diff
            else:
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = c + diff
        else:
            quad = qd[i] + qd[j] - 2.0 * qij
            if quad <= 0:
                quad = TAU
            delta = (grad[i] - grad[j]) / quad
            s = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if s > c:
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = s - c
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = s
            if s > c:
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = s - c
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = s
        dai = alpha[i] - old_ai
        daj = alpha[j] - old_aj
        for t in range(n):
            grad[t] += y[t] * (y[i] * ki[t] * dai + y[j] * kj[t] * daj)

    ub = np.inf
    lb = -np.inf
    sum_free = 0.0
    n_free = 0
    for t in range(n):
        yg = y[t] * grad[t]
        if alpha[t] >= c:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            sum_free += yg
    rho = sum_free / n_free if n_free > 0 else (ub + lb) / 2.0
    return alpha, rho, it, converged


@njit(nogil=True, cache=True)
def svm_decision(sv, coef, rho, queries, kind, gamma, coef0, degree):
    out = np.empty(queries.shape[0])
    for q in range(queries.shape[0]):
        acc = 0.0
        for s in range(sv.shape[0]):
            acc += coef[s] * _kernel(sv, s, queries, q, kind, gamma, coef0, degree)
        out[q] = acc - rho
    return out
