"""Native binary classifiers: CART, bagged forest, boosted trees, linear SVM.

All four are deterministic given their seed, serialize to plain JSON,
and reproduce their predictions bit-exactly after a round trip. Ties
everywhere resolve toward the negative class, the lower feature index,
and the lower threshold, in that order, so retraining is stable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ._seeding import substream

_EPS = 1e-12


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = None
    min_leaf: int = 1

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")


@dataclass(frozen=True)
class ForestParams:
    trees: int = 40
    max_depth: int = None
    min_leaf: int = 1

    def __post_init__(self):
        if self.trees < 1:
            raise ValueError("trees must be >= 1")


@dataclass(frozen=True)
class GbdtParams:
    iterations: int = 80
    learning_rate: float = 0.1
    max_depth: int = 3
    min_leaf: int = 5
    bins: int = 32
    reg_lambda: float = 1.0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning rate must be in (0, 1]")
        if self.bins < 2:
            raise ValueError("need at least 2 bins")


@dataclass(frozen=True)
class SvmParams:
    reg: float = 1e-3
    epochs: int = 40

    def __post_init__(self):
        if self.reg <= 0:
            raise ValueError("reg must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


class Tree:
    """Flat-array decision tree; node 0 is the root, -1 marks a leaf child."""

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            internal = self.left[node] >= 0
            if not internal.any():
                break
            idx = np.flatnonzero(internal)
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
        return self.value[node]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.predict_value(X).astype(np.int8)

    def to_dict(self) -> dict:
        return {"family": "tree",
                "feature": self.feature.tolist(),
                "threshold": self.threshold.tolist(),
                "left": self.left.tolist(),
                "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(d["feature"], d["threshold"], d["left"], d["right"], d["value"])


class _TreeBuilder:
    def __init__(self):
        self.feature, self.threshold = [], []
        self.left, self.right, self.value = [], [], []

    def add(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def done(self) -> Tree:
        return Tree(self.feature, self.threshold, self.left, self.right, self.value)


def _best_gini_split(X, y, rows, features, min_leaf):
    """Best (gain, feature, threshold, left rows, right rows) or None."""
    n = len(rows)
    ones = int(y[rows].sum())
    zeros = n - ones
    parent = 1.0 - (zeros * zeros + ones * ones) / (n * n)
    best = None
    for j in features:
        x = X[rows, j]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        ys = y[rows][order]
        boundary = np.flatnonzero(xs[1:] != xs[:-1]) + 1   # left segment size
        if boundary.size == 0:
            continue
        left_ones = np.cumsum(ys)[boundary - 1].astype(float)
        left_n = boundary.astype(float)
        right_n = n - left_n
        valid = (left_n >= min_leaf) & (right_n >= min_leaf)
        if not valid.any():
            continue
        right_ones = ones - left_ones
        left_zeros = left_n - left_ones
        right_zeros = right_n - right_ones
        gini_l = 1.0 - (left_zeros ** 2 + left_ones ** 2) / (left_n ** 2)
        gini_r = 1.0 - (right_zeros ** 2 + right_ones ** 2) / (right_n ** 2)
        gain = parent - (left_n * gini_l + right_n * gini_r) / n
        gain[~valid] = -np.inf
        i = int(np.argmax(gain))            # first max = lowest threshold
        if gain[i] == -np.inf:
            continue
        if best is None or gain[i] > best[0] + _EPS:
            cut = boundary[i]
            threshold = (xs[cut - 1] + xs[cut]) / 2.0
            left_rows = rows[order[:cut]]
            right_rows = rows[order[cut:]]
            best = (float(gain[i]), int(j), float(threshold), left_rows, right_rows)
    return best


def fit_tree(X: np.ndarray, y: np.ndarray, params: TreeParams = None,
             rng: np.random.Generator = None, mtry: int = None) -> Tree:
    """Greedy binary CART on the Gini criterion.

    Splits fall at midpoints of consecutive distinct values; a tied gain
    goes to the lower feature index, then the lower threshold. Impure
    nodes split even at zero gain while depth and leaf-size budgets
    allow, which is what lets parity-style targets fit exactly.
    """
    params = params or TreeParams()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-d with one label per row")
    if len(X) == 0:
        raise ValueError("cannot fit on an empty dataset")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    d = X.shape[1]
    builder = _TreeBuilder()

    # explicit stack; left child pushed last so it grows first
    stack = [(np.arange(len(X)), 0, -1, "left")]
    while stack:
        rows, depth, parent, side = stack.pop()
        node = builder.add()
        if parent >= 0:
            if side == "left":
                builder.left[parent] = node
            else:
                builder.right[parent] = node
        ones = int(y[rows].sum())
        zeros = len(rows) - ones
        builder.value[node] = 1.0 if ones > zeros else 0.0
        if ones == 0 or zeros == 0:
            continue
        if params.max_depth is not None and depth >= params.max_depth:
            continue
        if len(rows) < 2 * params.min_leaf:
            continue
        if mtry is not None and mtry < d:
            features = np.sort(rng.choice(d, size=mtry, replace=False))
        else:
            features = np.arange(d)
        split = _best_gini_split(X, y, rows, features, params.min_leaf)
        if split is None:
            continue
        _, j, threshold, left_rows, right_rows = split
        builder.feature[node] = j
        builder.threshold[node] = threshold
        stack.append((right_rows, depth + 1, node, "right"))
        stack.append((left_rows, depth + 1, node, "left"))
    return builder.done()


class Forest:
    def __init__(self, trees, params: ForestParams):
        self.trees = list(trees)
        self.params = params

    def predict(self, X: np.ndarray) -> np.ndarray:
        votes = np.zeros(len(X), dtype=np.int64)
        for tree in self.trees:
            votes += tree.predict(X)
        # strict majority; a tied vote stays negative
        return (2 * votes > len(self.trees)).astype(np.int8)

    def to_dict(self) -> dict:
        return {"family": "forest",
                "params": {"trees": self.params.trees,
                           "max_depth": self.params.max_depth,
                           "min_leaf": self.params.min_leaf},
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "Forest":
        return cls([Tree.from_dict(t) for t in d["trees"]],
                   ForestParams(**d["params"]))


def fit_forest(X: np.ndarray, y: np.ndarray, params: ForestParams = None,
               seed: int = 0) -> Forest:
    """Bootstrap-bagged CART trees with per-node feature subsampling."""
    params = params or ForestParams()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    mtry = max(1, int(math.floor(math.sqrt(d))))
    tree_params = TreeParams(max_depth=params.max_depth, min_leaf=params.min_leaf)
    trees = []
    for t in range(params.trees):
        rng = substream(seed, "tree", t)
        rows = np.sort(rng.integers(0, n, size=n))
        trees.append(fit_tree(X[rows], y[rows], tree_params, rng=rng, mtry=mtry))
    return Forest(trees, params)


def _log_loss(y: np.ndarray, score: np.ndarray) -> float:
    p = 1.0 / (1.0 + np.exp(-score))
    p = np.clip(p, _EPS, 1.0 - _EPS)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


class Gbdt:
    """Boosted histogram trees on the logistic loss."""

    def __init__(self, base_score, trees, bin_edges, params: GbdtParams,
                 train_loss):
        self.base_score = float(base_score)
        self.trees = list(trees)              # leaf values carry the step size
        self.bin_edges = bin_edges
        self.params = params
        self.train_loss = list(train_loss)

    def decision_score(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        score = np.full(len(X), self.base_score)
        for tree in self.trees:
            score += tree.predict_value(X)
        return score

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.decision_score(X)))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int8)

    def to_dict(self) -> dict:
        return {"family": "gbdt",
                "base_score": self.base_score,
                "params": {"iterations": self.params.iterations,
                           "learning_rate": self.params.learning_rate,
                           "max_depth": self.params.max_depth,
                           "min_leaf": self.params.min_leaf,
                           "bins": self.params.bins,
                           "reg_lambda": self.params.reg_lambda},
                "train_loss": self.train_loss,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "Gbdt":
        return cls(d["base_score"], [Tree.from_dict(t) for t in d["trees"]],
                   None, GbdtParams(**d["params"]), d["train_loss"])


def _bin_features(X: np.ndarray, bins: int):
    """Equal-frequency bin edges and codes; code <= b iff x <= edges[b]."""
    edges = []
    codes = np.empty(X.shape, dtype=np.int64)
    quantiles = np.linspace(0, 1, bins + 1)[1:-1]
    for j in range(X.shape[1]):
        e = np.unique(np.quantile(X[:, j], quantiles, method="linear"))
        edges.append(e)
        codes[:, j] = np.searchsorted(e, X[:, j], side="left")
    return edges, codes


def _fit_hist_tree(codes, edges, g, h, rows, params: GbdtParams):
    """One regression tree on binned gradients, Newton leaf values."""
    builder = _TreeBuilder()
    lam = params.reg_lambda

    def grow(rows: np.ndarray, depth: int) -> int:
        node = builder.add()
        G = float(g[rows].sum())
        H = float(h[rows].sum())
        builder.value[node] = -G / (H + lam)
        if depth >= params.max_depth or len(rows) < 2 * params.min_leaf:
            return node
        parent_score = G * G / (H + lam)
        best = None
        for j in range(codes.shape[1]):
            nb = len(edges[j]) + 1
            if nb < 2:
                continue
            local = codes[rows, j]
            hg = np.bincount(local, weights=g[rows], minlength=nb)
            hh = np.bincount(local, weights=h[rows], minlength=nb)
            hc = np.bincount(local, minlength=nb)
            GL = np.cumsum(hg)[:-1]
            HL = np.cumsum(hh)[:-1]
            CL = np.cumsum(hc)[:-1]
            GR = G - GL
            HR = H - HL
            CR = len(rows) - CL
            valid = (CL >= params.min_leaf) & (CR >= params.min_leaf)
            if not valid.any():
                continue
            gain = GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent_score
            gain[~valid] = -np.inf
            b = int(np.argmax(gain))        # first max = lowest bin
            if gain[b] <= _EPS:
                continue
            if best is None or gain[b] > best[0] + _EPS:
                best = (float(gain[b]), j, b)
        if best is None:
            return node
        _, j, b = best
        go_left = codes[rows, j] <= b
        builder.feature[node] = j
        builder.threshold[node] = float(edges[j][b])
        builder.left[node] = grow(rows[go_left], depth + 1)
        builder.right[node] = grow(rows[~go_left], depth + 1)
        return node

    grow(rows, 0)
    return builder.done()


def fit_gbdt(X: np.ndarray, y: np.ndarray, params: GbdtParams = None) -> Gbdt:
    """Gradient boosting with a monotone line search.

    Starts from the prior log-odds; each iteration fits a histogram tree
    to the logistic gradients and halves its step until the training
    loss does not increase, so the recorded loss curve never rises.
    """
    params = params or GbdtParams()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-d with one label per row")
    if len(X) == 0:
        raise ValueError("cannot fit on an empty dataset")
    edges, codes = _bin_features(X, params.bins)
    p0 = min(max(float(y.mean()), 1e-6), 1.0 - 1e-6)
    base = math.log(p0 / (1.0 - p0))
    score = np.full(len(y), base)
    loss = _log_loss(y, score)
    losses = [loss]
    trees = []
    rows = np.arange(len(y))
    for _ in range(params.iterations):
        p = 1.0 / (1.0 + np.exp(-score))
        g = p - y
        h = np.maximum(p * (1.0 - p), _EPS)
        tree = _fit_hist_tree(codes, edges, g, h, rows, params)
        step = tree.predict_value(X) * params.learning_rate
        scale = 1.0
        for _ in range(12):
            candidate = _log_loss(y, score + scale * step)
            if candidate <= loss + _EPS:
                break
            scale /= 2.0
        else:
            losses.append(loss)
            break
        tree.value = tree.value * (params.learning_rate * scale)
        trees.append(tree)
        score = score + scale * step
        loss = candidate
        losses.append(loss)
    return Gbdt(base, trees, edges, params, losses)


class Svm:
    """Linear classifier trained by the Pegasos subgradient method."""

    def __init__(self, weights, params: SvmParams, objectives):
        self.weights = np.asarray(weights, dtype=float)   # bias is the last entry
        self.params = params
        self.objectives = list(objectives)

    def decision_score(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return X @ self.weights[:-1] + self.weights[-1]

    def predict(self, X: np.ndarray) -> np.ndarray:
        # a zero score stays negative
        return (self.decision_score(X) > 0).astype(np.int8)

    def to_dict(self) -> dict:
        return {"family": "svm",
                "weights": self.weights.tolist(),
                "params": {"reg": self.params.reg, "epochs": self.params.epochs},
                "objectives": self.objectives}

    @classmethod
    def from_dict(cls, d: dict) -> "Svm":
        return cls(d["weights"], SvmParams(**d["params"]), d["objectives"])


def fit_svm(X: np.ndarray, y: np.ndarray, params: SvmParams = None,
            seed: int = 0) -> Svm:
    """Pegasos on the hinge loss with step size 1/(reg * t).

    Records the primal objective at every epoch end; it trends down
    with the usual stochastic wobble.
    """
    params = params or SvmParams()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-d with one label per row")
    if len(X) == 0:
        raise ValueError("cannot fit on an empty dataset")
    n, d = X.shape
    aug = np.hstack([X, np.ones((n, 1))])
    signed = (2 * y - 1).astype(float)
    w = np.zeros(d + 1)
    reg = params.reg
    t = 0
    objectives = []
    for epoch in range(params.epochs):
        order = substream(seed, "epoch", epoch).permutation(n)
        for i in order:
            t += 1
            eta = 1.0 / (reg * t)
            margin = signed[i] * (aug[i] @ w)
            w *= 1.0 - eta * reg
            if margin < 1.0:
                w += eta * signed[i] * aug[i]
        hinge = np.maximum(0.0, 1.0 - signed * (aug @ w))
        objectives.append(float(reg / 2.0 * (w @ w) + hinge.mean()))
    return Svm(w, params, objectives)


_FAMILIES = {
    "tree": Tree,
    "forest": Forest,
    "gbdt": Gbdt,
    "svm": Svm,
}


def model_from_dict(d: dict):
    family = d.get("family")
    if family not in _FAMILIES:
        raise ValueError(f"unknown model family {family!r}")
    return _FAMILIES[family].from_dict(d)


def save_model(model, path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh, sort_keys=True)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
