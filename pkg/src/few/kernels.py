"""Inner loops that dominate FEW's runtime.

Each kernel has two implementations with identical contracts:

* ``*_numba`` -- explicit loops compiled with ``numba.njit``;
* ``*_numpy`` -- vectorised numpy, used when numba is missing or
  ``FEW_DISABLE_NUMBA=1``.

The un-suffixed names are bound to whichever backend is active. Random
draws never happen inside a kernel; callers pass pre-drawn orders/uniforms
so both backends consume the RNG stream identically.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

GINI = 0
ENTROPY = 1
L1 = 1
L2 = 2


# ------------------------------------------------------------ logistic CD
#
# Proximal Newton: each outer step builds the quadratic model of the log-loss
# at the current margins (IRLS weights), minimises model + penalty by cyclic
# coordinate descent (exact soft-threshold for L1), then backtracks along the
# resulting direction until the Armijo condition holds.

INNER_SWEEPS = 100
ARMIJO = 0.01
MAX_HALVINGS = 40
MIN_CURVATURE = 1e-12


@njit
def _logloss_numba(z, t, C):
    s = 0.0
    for i in range(z.shape[0]):
        zi = z[i]
        s += max(zi, 0.0) + np.log1p(np.exp(-abs(zi))) - t[i] * zi
    return C * s


@njit
def _penalty_numba(w, penalty):
    s = 0.0
    if penalty == 1:
        for j in range(w.shape[0]):
            s += abs(w[j])
    else:
        for j in range(w.shape[0]):
            s += 0.5 * w[j] * w[j]
    return s


@njit
def logistic_cd_numba(X, t, C, penalty, tol, max_iter):
    n, p = X.shape
    w = np.zeros(p)
    b = 0.0
    z = np.zeros(n)
    g = np.empty(n)
    W = np.empty(n)
    u = np.empty(n)
    d = np.empty(p)
    H = np.empty(p)
    zt = np.empty(n)
    obj = _logloss_numba(z, t, C) + _penalty_numba(w, penalty)
    n_iter = 0
    for it in range(max_iter):
        n_iter = it + 1
        Hb = 0.0
        for i in range(n):
            zi = z[i]
            if zi >= 0:
                pi = 1.0 / (1.0 + np.exp(-zi))
            else:
                e = np.exp(zi)
                pi = e / (1.0 + e)
            g[i] = C * (pi - t[i])
            W[i] = max(C * pi * (1.0 - pi), MIN_CURVATURE)
            Hb += W[i]
            u[i] = 0.0
        for j in range(p):
            s = 0.0
            for i in range(n):
                s += W[i] * X[i, j] * X[i, j]
            H[j] = s
            d[j] = 0.0
        db = 0.0
        for sweep in range(INNER_SWEEPS):
            change = 0.0
            grad = 0.0
            for i in range(n):
                grad += g[i] + W[i] * u[i]
            step = -grad / Hb
            db += step
            for i in range(n):
                u[i] += step
            change = max(change, abs(step))
            for j in range(p):
                if H[j] == 0.0:
                    continue
                grad = 0.0
                for i in range(n):
                    grad += (g[i] + W[i] * u[i]) * X[i, j]
                cur = w[j] + d[j]
                if penalty == 1:
                    a = H[j] * cur - grad
                    if a > 1.0:
                        new = (a - 1.0) / H[j]
                    elif a < -1.0:
                        new = (a + 1.0) / H[j]
                    else:
                        new = 0.0
                else:
                    new = cur - (grad + cur) / (H[j] + 1.0)
                delta = new - cur
                if delta != 0.0:
                    d[j] += delta
                    for i in range(n):
                        u[i] += delta * X[i, j]
                    change = max(change, abs(delta))
            if change < tol:
                break
        # predicted decrease of the model (<= 0)
        lin = 0.0
        for i in range(n):
            lin += g[i] * u[i]
        wd = w + d
        pred = lin + _penalty_numba(wd, penalty) - _penalty_numba(w, penalty)
        alpha = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS):
            for i in range(n):
                zt[i] = z[i] + alpha * u[i]
            new_obj = _logloss_numba(zt, t, C) + _penalty_numba(w + alpha * d, penalty)
            if new_obj <= obj + ARMIJO * alpha * pred:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        biggest = abs(alpha * db)
        for j in range(p):
            w[j] += alpha * d[j]
            biggest = max(biggest, abs(alpha * d[j]))
        b += alpha * db
        for i in range(n):
            z[i] = zt[i]
        obj = new_obj
        if biggest < tol:
            break
    return w, b, n_iter


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _logloss(z, t, C):
    return C * float(np.sum(np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z))) - t * z))


def _penalty(w, penalty):
    return float(np.abs(w).sum()) if penalty == L1 else 0.5 * float(w @ w)


def logistic_cd_numpy(X, t, C, penalty, tol, max_iter):
    n, p = X.shape
    w = np.zeros(p)
    b = 0.0
    z = np.zeros(n)
    obj = _logloss(z, t, C) + _penalty(w, penalty)
    n_iter = 0
    for it in range(max_iter):
        n_iter = it + 1
        pr = _sigmoid(z)
        g = C * (pr - t)
        W = np.maximum(C * pr * (1.0 - pr), MIN_CURVATURE)
        Hb = W.sum()
        H = W @ (X * X)
        d = np.zeros(p)
        db = 0.0
        u = np.zeros(n)
        for sweep in range(INNER_SWEEPS):
            step = -np.sum(g + W * u) / Hb
            db += step
            u += step
            change = abs(step)
            for j in range(p):
                if H[j] == 0.0:
                    continue
                grad = np.dot(g + W * u, X[:, j])
                cur = w[j] + d[j]
                if penalty == L1:
                    a = H[j] * cur - grad
                    new = np.sign(a) * max(abs(a) - 1.0, 0.0) / H[j]
                else:
                    new = cur - (grad + cur) / (H[j] + 1.0)
                delta = new - cur
                if delta != 0.0:
                    d[j] += delta
                    u += delta * X[:, j]
                    change = max(change, abs(delta))
            if change < tol:
                break
        pred = float(g @ u) + _penalty(w + d, penalty) - _penalty(w, penalty)
        alpha = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS):
            zt = z + alpha * u
            new_obj = _logloss(zt, t, C) + _penalty(w + alpha * d, penalty)
            if new_obj <= obj + ARMIJO * alpha * pred:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        biggest = max(abs(alpha * db), float(np.abs(alpha * d).max(initial=0.0)))
        w = w + alpha * d
        b += alpha * db
        z = zt
        obj = new_obj
        if biggest < tol:
            break
    return w, b, n_iter


# ------------------------------------------------------------- CART split

@njit
def _impurity(counts, total, criterion):
    if total <= 0:
        return 0.0
    acc = 0.0
    if criterion == 0:
        for c in range(counts.shape[0]):
            q = counts[c] / total
            acc += q * q
        return 1.0 - acc
    for c in range(counts.shape[0]):
        if counts[c] > 0:
            q = counts[c] / total
            acc -= q * np.log2(q)
    return acc


@njit
def best_split_numba(X, y, n_classes, features, criterion, min_leaf):
    n = X.shape[0]
    total = np.zeros(n_classes)
    for i in range(n):
        total[y[i]] += 1.0
    parent = _impurity(total, n, criterion)
    best_gain = -np.inf
    best_feat = -1
    best_thr = 0.0
    left = np.zeros(n_classes)
    right = np.zeros(n_classes)
    for f in features:
        col = X[:, f]
        order = np.argsort(col)
        left[:] = 0.0
        for pos in range(n - 1):
            left[y[order[pos]]] += 1.0
            nl = pos + 1
            nr = n - nl
            a = col[order[pos]]
            b = col[order[pos + 1]]
            if a == b or nl < min_leaf or nr < min_leaf:
                continue
            for c in range(n_classes):
                right[c] = total[c] - left[c]
            gain = parent - (nl / n) * _impurity(left, nl, criterion) \
                - (nr / n) * _impurity(right, nr, criterion)
            if gain > best_gain:
                best_gain = gain
                best_feat = f
                thr = 0.5 * (a + b)
                best_thr = a if thr >= b else thr
    return best_feat, best_thr, best_gain


def _impurity_rows(counts, totals, criterion):
    with np.errstate(divide="ignore", invalid="ignore"):
        q = counts / totals[:, None]
        if criterion == GINI:
            acc = np.zeros(q.shape[0])
            for c in range(q.shape[1]):
                acc += q[:, c] * q[:, c]
            return 1.0 - acc
        acc = np.zeros(q.shape[0])
        for c in range(q.shape[1]):
            qc = q[:, c]
            acc -= np.where(qc > 0, qc * np.log2(np.where(qc > 0, qc, 1.0)), 0.0)
        return acc


def best_split_numpy(X, y, n_classes, features, criterion, min_leaf):
    n = X.shape[0]
    total = np.bincount(y, minlength=n_classes).astype(float)
    parent = _impurity_rows(total[None, :], np.array([float(n)]), criterion)[0]
    nl = np.arange(1, n, dtype=float)
    nr = n - nl
    size_ok = (nl >= min_leaf) & (nr >= min_leaf)
    best_gain, best_feat, best_thr = -np.inf, -1, 0.0
    onehot = np.zeros((n, n_classes))
    for f in features:
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        onehot[:] = 0.0
        onehot[np.arange(n), y[order]] = 1.0
        left = np.cumsum(onehot, axis=0)[:-1]
        right = total - left
        gain = parent - (nl / n) * _impurity_rows(left, nl, criterion) \
            - (nr / n) * _impurity_rows(right, nr, criterion)
        ok = size_ok & (xs[:-1] != xs[1:])
        if not ok.any():
            continue
        gain = np.where(ok, gain, -np.inf)
        pos = int(np.argmax(gain))
        if gain[pos] > best_gain:
            best_gain, best_feat = gain[pos], int(f)
            a, b = xs[pos], xs[pos + 1]
            thr = 0.5 * (a + b)
            best_thr = a if thr >= b else thr
    return best_feat, best_thr, best_gain


# --------------------------------------------------- epsilon-lexicase survival

@njit
def _mad(v):
    med = np.median(v)
    return np.median(np.abs(v - med))


@njit
def eps_lexicase_numba(errors, n_select, orders, picks):
    m, n_cases = errors.shape
    taken = np.zeros(m, dtype=np.bool_)
    out = np.empty(n_select, dtype=np.int64)
    pool = np.empty(m, dtype=np.int64)
    start = np.empty(m, dtype=np.int64)
    for slot in range(n_select):
        size = 0
        for i in range(m):
            if not taken[i]:
                start[size] = i
                pool[size] = i
                size += 1
        n_start = size
        for k in range(n_cases):
            if size <= 1:
                break
            case = orders[slot, k]
            elite = np.inf
            for i in range(size):
                e = errors[pool[i], case]
                if e < elite:
                    elite = e
            col = np.empty(n_start)
            for i in range(n_start):
                col[i] = errors[start[i], case]
            eps = _mad(col)
            kept = 0
            for i in range(size):
                if errors[pool[i], case] <= elite + eps:
                    pool[kept] = pool[i]
                    kept += 1
            size = kept
        chosen = pool[int(picks[slot] * size)]
        out[slot] = chosen
        taken[chosen] = True
    return out


def eps_lexicase_numpy(errors, n_select, orders, picks):
    m = errors.shape[0]
    taken = np.zeros(m, dtype=bool)
    out = np.empty(n_select, dtype=np.int64)
    for slot in range(n_select):
        start = np.flatnonzero(~taken)
        pool = start
        for case in orders[slot]:
            if pool.size <= 1:
                break
            col = errors[start, case]
            med = np.median(col)
            eps = np.median(np.abs(col - med))
            e = errors[pool, case]
            pool = pool[e <= e.min() + eps]
        chosen = pool[int(picks[slot] * pool.size)]
        out[slot] = chosen
        taken[chosen] = True
    return out


if USE_NUMBA:
    logistic_cd = logistic_cd_numba
    best_split = best_split_numba
    eps_lexicase = eps_lexicase_numba
else:
    logistic_cd = logistic_cd_numpy
    best_split = best_split_numpy
    eps_lexicase = eps_lexicase_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
