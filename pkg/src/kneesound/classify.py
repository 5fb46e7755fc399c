"""From-scratch classifiers: soft-margin SVM (SMO), LDA and a CART tree.

The SMO inner loop is the hot path of every experiment, so it lives in a
compiled extension when available; a numpy implementation of the identical
algorithm is selected at import time otherwise. Everything downstream is
agnostic to the backend.

Label convention throughout: normal -> -1, abnormal -> +1.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateTrainingError

try:
    from . import _smo as _smo_backend

    COMPILED_SMO = True
except ImportError:  # pragma: no cover - depends on build environment
    from . import _smo_py as _smo_backend

    COMPILED_SMO = False
    warnings.warn(
        "compiled SMO kernel unavailable, falling back to the numpy solver",
        RuntimeWarning,
    )

CLASSIFIER_NAMES = ("svm-linear", "svm-gaussian", "lda", "cart")

DEFAULT_C = 1.0
DEFAULT_GAMMA = 1.0
DEFAULT_TOL = 1e-3
# Generous for the few-hundred-row problems this package trains (observed
# convergence is a few thousand pair updates); a warning fires if it binds.
DEFAULT_MAX_ITER = 100_000


def _check_training_input(X, y):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n x d) with one label per row")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise ValueError("training data contains non-finite values")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if np.all(y > 0) or np.all(y < 0):
        raise DegenerateTrainingError("training data contains a single class")
    return X, y


def kernel_matrix(kind: str, X1: np.ndarray, X2: np.ndarray, gamma: float = DEFAULT_GAMMA):
    """Gram matrix between row sets. 'linear' is the dot product, 'gaussian'
    is exp(-gamma * ||a - b||^2)."""
    X1 = np.asarray(X1, dtype=np.float64)
    X2 = np.asarray(X2, dtype=np.float64)
    if kind == "linear":
        return X1 @ X2.T
    if kind == "gaussian":
        sq = (
            np.sum(X1 * X1, axis=1)[:, None]
            + np.sum(X2 * X2, axis=1)[None, :]
            - 2.0 * (X1 @ X2.T)
        )
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-gamma * sq)
    raise ValueError(f"unknown kernel {kind!r}")


@dataclass
class SvmModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_s * y_s, one per support vector
    bias: float
    kernel: str
    gamma: float
    C: float
    iterations: int = 0
    gap: float = 0.0


def smo_solve(K, y, C=DEFAULT_C, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Raw dual solver on a precomputed kernel matrix (backend-selected)."""
    alpha, f, iters, gap = _smo_backend.solve(
        np.ascontiguousarray(K, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.float64),
        float(C),
        float(tol),
        int(max_iter),
    )
    if gap > tol:
        warnings.warn(
            f"SMO stopped at max_iter={max_iter} with gap {gap:.3g} > tol {tol:.3g}",
            RuntimeWarning,
        )
    return alpha, f, iters, gap


def svm_train(
    X,
    y,
    kernel: str = "linear",
    C: float = DEFAULT_C,
    gamma: float = DEFAULT_GAMMA,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SvmModel:
    """Train the L1 soft-margin SVM via SMO on the maximal violating pair.

    The bias is the mean of y - f over free support vectors; if none are
    free it falls back to the midpoint of the feasible interval.
    """
    X, y = _check_training_input(X, y)
    K = kernel_matrix(kernel, X, X, gamma)
    alpha, f, iters, gap = smo_solve(K, y, C, tol, max_iter)
    free = (alpha > 0.0) & (alpha < C)
    crit = y - f
    if free.any():
        bias = float(np.mean(crit[free]))
    else:
        up = ((y > 0.0) & (alpha < C)) | ((y < 0.0) & (alpha > 0.0))
        low = ((y > 0.0) & (alpha > 0.0)) | ((y < 0.0) & (alpha < C))
        hi = crit[up].max() if up.any() else 0.0
        lo = crit[low].min() if low.any() else 0.0
        bias = float((hi + lo) / 2.0)
    sv = alpha > 0.0
    return SvmModel(
        support_vectors=X[sv].copy(),
        dual_coef=(alpha * y)[sv],
        bias=bias,
        kernel=kernel,
        gamma=float(gamma),
        C=float(C),
        iterations=int(iters),
        gap=float(gap),
    )


def svm_decision(model: SvmModel, X) -> np.ndarray:
    """Signed decision values g(x); the boundary is g = 0."""
    X = np.asarray(X, dtype=np.float64)
    if model.support_vectors.shape[0] == 0:
        return np.full(X.shape[0], model.bias)
    Kx = kernel_matrix(model.kernel, X, model.support_vectors, model.gamma)
    return Kx @ model.dual_coef + model.bias


def svm_dual_objective(alpha, y, K) -> float:
    """Dual objective value sum(alpha) - 0.5 (alpha y)' K (alpha y)."""
    v = np.asarray(alpha, dtype=np.float64) * np.asarray(y, dtype=np.float64)
    return float(np.sum(alpha) - 0.5 * v @ np.asarray(K) @ v)


@dataclass
class LdaModel:
    weights: np.ndarray
    bias: float
    mean_neg: np.ndarray
    mean_pos: np.ndarray
    pooled_cov: np.ndarray
    prior_pos: float


def lda_train(X, y) -> LdaModel:
    """Two-class LDA with empirical priors and pooled covariance.

    The pooled covariance gets a ridge of 1e-6 * trace/d on the diagonal
    unconditionally, so near-singular folds stay solvable. The score is the
    log-posterior difference (abnormal minus normal), affine in x.
    """
    X, y = _check_training_input(X, y)
    n, d = X.shape
    if n < 3:
        raise DegenerateTrainingError("LDA needs at least 3 rows")
    pos = y > 0
    Xp, Xn = X[pos], X[~pos]
    mu_p = Xp.mean(axis=0)
    mu_n = Xn.mean(axis=0)
    scatter = (Xp - mu_p).T @ (Xp - mu_p) + (Xn - mu_n).T @ (Xn - mu_n)
    pooled = scatter / (n - 2)
    ridge = 1e-6 * np.trace(pooled) / d
    if ridge == 0.0:
        ridge = 1e-12
    pooled = pooled + ridge * np.eye(d)
    w = np.linalg.solve(pooled, mu_p - mu_n)
    prior_pos = Xp.shape[0] / n
    bias = float(-0.5 * (mu_p + mu_n) @ w + np.log(prior_pos / (1.0 - prior_pos)))
    return LdaModel(w, bias, mu_n, mu_p, pooled, prior_pos)


def lda_score(model: LdaModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return X @ model.weights + model.bias


class CartNode:
    """Binary tree node; feature is None at leaves."""

    __slots__ = ("feature", "threshold", "left", "right", "n_neg", "n_pos")

    def __init__(self, n_neg, n_pos, feature=None, threshold=0.0, left=None, right=None):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.n_neg = int(n_neg)
        self.n_pos = int(n_pos)

    @property
    def is_leaf(self):
        return self.feature is None

    @property
    def n(self):
        return self.n_neg + self.n_pos

    def gini(self):
        if self.n == 0:
            return 0.0
        p = self.n_pos / self.n
        return 1.0 - p * p - (1.0 - p) * (1.0 - p)

    def copy(self):
        if self.is_leaf:
            return CartNode(self.n_neg, self.n_pos)
        return CartNode(
            self.n_neg, self.n_pos, self.feature, self.threshold,
            self.left.copy(), self.right.copy(),
        )


@dataclass
class CartModel:
    root: CartNode
    alpha: float = 0.0


def _best_split(X, y):
    """Exhaustive Gini split search: (gain, feature, threshold) or None.

    Thresholds are midpoints between consecutive distinct sorted values.
    Ties resolve to the lowest feature index, then the lowest threshold.
    """
    n = y.shape[0]
    pos = (y > 0).astype(np.float64)
    total_pos = pos.sum()
    p = total_pos / n
    g0 = 1.0 - p * p - (1.0 - p) * (1.0 - p)
    best = None
    counts = np.arange(1.0, n)
    for fidx in range(X.shape[1]):
        col = X[:, fidx]
        order = np.argsort(col, kind="mergesort")
        sv = col[order]
        cum_pos = np.cumsum(pos[order])[:-1]
        cut = sv[:-1] < sv[1:]
        if not cut.any():
            continue
        nl = counts[cut]
        pl = cum_pos[cut]
        nr = n - nl
        pr = total_pos - pl
        gl = 1.0 - (pl / nl) ** 2 - ((nl - pl) / nl) ** 2
        gr = 1.0 - (pr / nr) ** 2 - ((nr - pr) / nr) ** 2
        gains = g0 - (nl * gl + nr * gr) / n
        k = int(np.argmax(gains))
        if best is None or gains[k] > best[0] + 1e-15:
            idx = np.flatnonzero(cut)[k]
            best = (float(gains[k]), fidx, float((sv[idx] + sv[idx + 1]) / 2.0))
    if best is None or best[0] <= 0.0:
        return None
    return best


def cart_grow(X, y) -> CartNode:
    """Grow an unpruned tree to purity (or until no split separates rows)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    root = CartNode(int(np.sum(y < 0)), int(np.sum(y > 0)))
    stack = [(root, np.arange(y.shape[0]))]
    while stack:
        node, idx = stack.pop()
        if node.n_neg == 0 or node.n_pos == 0:
            continue
        found = _best_split(X[idx], y[idx])
        if found is None:
            continue
        _, fidx, thr = found
        node.feature = int(fidx)
        node.threshold = thr
        go_left = X[idx, fidx] <= thr
        li, ri = idx[go_left], idx[~go_left]
        node.left = CartNode(int(np.sum(y[li] < 0)), int(np.sum(y[li] > 0)))
        node.right = CartNode(int(np.sum(y[ri] < 0)), int(np.sum(y[ri] > 0)))
        stack.append((node.left, li))
        stack.append((node.right, ri))
    return root


def _subtree_stats(node, n_root):
    """Post-order (n_leaves, subtree_risk, list of (node, g)) for internals."""
    if node.is_leaf:
        return 1, (node.n / n_root) * node.gini(), []
    ll, rl = _subtree_stats(node.left, n_root), _subtree_stats(node.right, n_root)
    leaves = ll[0] + rl[0]
    risk = ll[1] + rl[1]
    own_risk = (node.n / n_root) * node.gini()
    g = (own_risk - risk) / (leaves - 1)
    return leaves, risk, ll[2] + rl[2] + [(node, g)]


def _collapse(node):
    node.feature = None
    node.left = None
    node.right = None


def cart_prune_path(root: CartNode) -> list[float]:
    """Weakest-link alphas of the cost-complexity path (increasing).

    Mutates the given tree down to a single leaf; callers pass a copy.
    """
    n_root = root.n
    alphas = []
    while not root.is_leaf:
        _, _, internals = _subtree_stats(root, n_root)
        g_min = min(g for _, g in internals)
        for node, g in internals:
            if g <= g_min + 1e-12 and not node.is_leaf:
                _collapse(node)
        alphas.append(max(g_min, 0.0))
    return alphas


def cart_prune_at(root: CartNode, alpha: float) -> CartNode:
    """Smallest optimal subtree for penalty alpha (collapses g <= alpha)."""

    def visit(node):
        if node.is_leaf:
            return 1, (node.n / n_root) * node.gini()
        ln, lr = visit(node.left)
        rn, rr = visit(node.right)
        leaves, risk = ln + rn, lr + rr
        own = (node.n / n_root) * node.gini()
        g = (own - risk) / (leaves - 1)
        if g <= alpha + 1e-12:
            _collapse(node)
            return 1, own
        return leaves, risk

    n_root = root.n
    visit(root)
    return root


def _cart_predict_hard(root: CartNode, X) -> np.ndarray:
    return np.where(cart_node_scores(root, X) >= 0.5, 1.0, -1.0)


def cart_node_scores(root: CartNode, X) -> np.ndarray:
    """Leaf abnormal fraction for each row."""
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        node = root
        while not node.is_leaf:
            node = node.left if X[r, node.feature] <= node.threshold else node.right
        out[r] = node.n_pos / node.n if node.n else 0.5
    return out


MIN_ROWS_FOR_PRUNING_CV = 10


def cart_train(X, y, seed: int = 0, cv_folds: int = 5) -> CartModel:
    """Grow to purity, then prune by cost-complexity with internal CV.

    Candidate penalties are geometric means of consecutive path alphas (plus
    0 and a beyond-the-path sentinel); the candidate with the lowest summed
    held-out error wins, ties going to the larger penalty (smaller tree).
    Training sets below 10 rows skip the CV and keep the full tree.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    _check_training_input(X, y)
    root = cart_grow(X, y)
    n = y.shape[0]
    if root.is_leaf or n < MIN_ROWS_FOR_PRUNING_CV:
        return CartModel(root, 0.0)
    path = cart_prune_path(root.copy())
    if not path:
        return CartModel(root, 0.0)
    candidates = {0.0}
    for a, b in zip(path[:-1], path[1:]):
        candidates.add(float(np.sqrt(max(a, 0.0) * max(b, 0.0))))
    candidates.add(path[-1] * 2.0 + 1e-9)
    candidates = sorted(candidates)

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    folds = np.array_split(perm, cv_folds)
    fold_trees = []
    for fold in folds:
        mask = np.ones(n, dtype=bool)
        mask[fold] = False
        if len(np.unique(y[mask])) < 2:
            fold_trees.append(None)
            continue
        fold_trees.append(cart_grow(X[mask], y[mask]))
    errors = []
    for cand in candidates:
        wrong = 0
        for fold, tree in zip(folds, fold_trees):
            if tree is None or len(fold) == 0:
                continue
            pruned = cart_prune_at(tree.copy(), cand)
            wrong += int(np.sum(_cart_predict_hard(pruned, X[fold]) != y[fold]))
        errors.append(wrong)
    best_err = min(errors)
    chosen = max(c for c, e in zip(candidates, errors) if e == best_err)
    return CartModel(cart_prune_at(root, chosen), float(chosen))


def cart_score(model: CartModel, X) -> np.ndarray:
    return cart_node_scores(model.root, X)


# Uniform interface used by the experiment loop. Scores are raw (decision
# values for SVM/LDA, leaf fractions for CART); predictions threshold at 0
# for the margin classifiers and at 0.5 for CART.


def train_model(name: str, X, y, seed: int = 0):
    if name == "svm-linear":
        return svm_train(X, y, kernel="linear")
    if name == "svm-gaussian":
        return svm_train(X, y, kernel="gaussian")
    if name == "lda":
        return lda_train(X, y)
    if name == "cart":
        return cart_train(X, y, seed=seed)
    raise ValueError(f"unknown classifier {name!r}, expected one of {CLASSIFIER_NAMES}")


def model_scores(model, X) -> np.ndarray:
    if isinstance(model, SvmModel):
        return svm_decision(model, X)
    if isinstance(model, LdaModel):
        return lda_score(model, X)
    if isinstance(model, CartModel):
        return cart_score(model, X)
    raise TypeError(f"not a model: {type(model).__name__}")


def model_predict(model, X) -> np.ndarray:
    scores = model_scores(model, X)
    cutoff = 0.5 if isinstance(model, CartModel) else 0.0
    return np.where(scores >= cutoff, 1.0, -1.0)


def _node_to_dict(node: CartNode) -> dict:
    d = {"n_neg": node.n_neg, "n_pos": node.n_pos}
    if not node.is_leaf:
        d.update(
            feature=node.feature,
            threshold=node.threshold,
            left=_node_to_dict(node.left),
            right=_node_to_dict(node.right),
        )
    return d


def _node_from_dict(d: dict) -> CartNode:
    if "feature" not in d:
        return CartNode(d["n_neg"], d["n_pos"])
    return CartNode(
        d["n_neg"],
        d["n_pos"],
        d["feature"],
        d["threshold"],
        _node_from_dict(d["left"]),
        _node_from_dict(d["right"]),
    )


def save_model(model, path: str | Path) -> None:
    """Serialise any trained model to JSON; load_model round-trips exactly."""
    if isinstance(model, SvmModel):
        payload = {
            "kind": "svm",
            "kernel": model.kernel,
            "gamma": model.gamma,
            "C": model.C,
            "bias": model.bias,
            "support_vectors": model.support_vectors.tolist(),
            "dual_coef": model.dual_coef.tolist(),
        }
    elif isinstance(model, LdaModel):
        payload = {
            "kind": "lda",
            "weights": model.weights.tolist(),
            "bias": model.bias,
            "mean_neg": model.mean_neg.tolist(),
            "mean_pos": model.mean_pos.tolist(),
            "pooled_cov": model.pooled_cov.tolist(),
            "prior_pos": model.prior_pos,
        }
    elif isinstance(model, CartModel):
        payload = {"kind": "cart", "alpha": model.alpha, "root": _node_to_dict(model.root)}
    else:
        raise TypeError(f"not a model: {type(model).__name__}")
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_model(path: str | Path):
    with open(path) as fh:
        payload = json.load(fh)
    kind = payload.get("kind")
    if kind == "svm":
        return SvmModel(
            support_vectors=np.asarray(payload["support_vectors"], dtype=np.float64),
            dual_coef=np.asarray(payload["dual_coef"], dtype=np.float64),
            bias=float(payload["bias"]),
            kernel=payload["kernel"],
            gamma=float(payload["gamma"]),
            C=float(payload["C"]),
        )
    if kind == "lda":
        return LdaModel(
            weights=np.asarray(payload["weights"], dtype=np.float64),
            bias=float(payload["bias"]),
            mean_neg=np.asarray(payload["mean_neg"], dtype=np.float64),
            mean_pos=np.asarray(payload["mean_pos"], dtype=np.float64),
            pooled_cov=np.asarray(payload["pooled_cov"], dtype=np.float64),
            prior_pos=float(payload["prior_pos"]),
        )
    if kind == "cart":
        return CartModel(_node_from_dict(payload["root"]), float(payload.get("alpha", 0.0)))
    raise ValueError(f"unrecognised model payload in {path}")
