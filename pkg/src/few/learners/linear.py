"""One-vs-rest linear classifiers on standardized features."""
import numpy as np

from .. import kernels


def _ovr_targets(y, n_classes):
    # binary problems train a single model for class 1
    if n_classes == 2:
        return [(y == 1).astype(float)]
    return [(y == c).astype(float) for c in range(n_classes)]


def fit_logreg(Z, y, n_classes, hp, rng=None):
    """L1/L2 logistic regression, one-vs-rest.

    Minimises ``C * sum(log-loss) + penalty(w)`` with an unpenalised
    intercept; see ``kernels.logistic_cd``.
    """
    penalty = kernels.L1 if hp["penalty"] == "l1" else kernels.L2
    Z = np.ascontiguousarray(Z, dtype=float)
    coef, intercept, iters = [], [], []
    for t in _ovr_targets(y, n_classes):
        w, b, it = kernels.logistic_cd(Z, t, float(hp["C"]), penalty,
                                       float(hp["tol"]), int(hp["max_iter"]))
        coef.append(w)
        intercept.append(b)
        iters.append(int(it))
    return {"coef": np.array(coef), "intercept": np.array(intercept), "n_iter": iters}


def _svc_objective(Z, t, w, b, lam, l1):
    hinge = np.maximum(0.0, 1.0 - t * (Z @ w + b)).mean()
    reg = lam * np.abs(w).sum() if l1 else 0.5 * lam * w @ w
    return hinge + reg


def _fit_svc_binary(Z, t, C, l1, epochs):
    n, p = Z.shape
    lam = 1.0 / (C * n)
    w = np.zeros(p)
    b = 0.0
    # keep early steps bounded by the data scale
    eta_max = 1.0 / max(np.mean(np.einsum("ij,ij->i", Z, Z)) + 1.0, 1.0)
    best = (_svc_objective(Z, t, w, b, lam, l1), w.copy(), b)
    for step in range(1, epochs + 1):
        eta = min(1.0 / (lam * step), eta_max * np.sqrt(epochs / step))
        active = t * (Z @ w + b) < 1.0
        gw = -(t[active] @ Z[active]) / n
        gb = -t[active].sum() / n
        if l1:
            w = w - eta * gw
            w = np.sign(w) * np.maximum(np.abs(w) - eta * lam, 0.0)
        else:
            w = w - eta * (gw + lam * w)
        b = b - eta * gb
        obj = _svc_objective(Z, t, w, b, lam, l1)
        if obj < best[0]:
            best = (obj, w.copy(), b)
    return best[1], best[2]


def fit_linear_svc(Z, y, n_classes, hp, rng=None):
    """Hinge-loss linear SVM by full-batch subgradient descent (best iterate kept)."""
    Z = np.asarray(Z, dtype=float)
    coef, intercept = [], []
    for t in _ovr_targets(y, n_classes):
        w, b = _fit_svc_binary(Z, 2.0 * t - 1.0, float(hp["C"]), hp["penalty"] == "l1",
                               int(hp["epochs"]))
        coef.append(w)
        intercept.append(b)
    return {"coef": np.array(coef), "intercept": np.array(intercept)}


def decision(params, Z):
    return Z @ params["coef"].T + params["intercept"]


def predict_linear(params, Z, n_classes):
    scores = decision(params, Z)
    if n_classes == 2:
        return (scores[:, 0] > 0).astype(np.int64)
    return np.argmax(scores, axis=1)


def linear_importances(params):
    return np.abs(params["coef"]).max(axis=0)
