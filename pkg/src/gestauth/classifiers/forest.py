"""Random forest over feature vectors: bootstrap resamples, Gini splits,
sqrt(n_features) candidates per split, fully grown trees.

A sample's score is the fraction of trees whose leaf votes positive, so
scores lie on the lattice k / n_trees.
"""

import json
import math
from dataclasses import asdict, dataclass

import numpy as np


class ForestError(ValueError):
    pass


@dataclass(frozen=True)
class ForestSpec:
    n_trees: int = 100
    max_features: str = "sqrt"
    bootstrap: bool = True
    min_samples_leaf: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ForestError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ForestError("min_samples_leaf must be >= 1")
        if self.max_features not in ("sqrt", "all"):
            raise ForestError("max_features must be 'sqrt' or 'all'")


def _n_candidates(spec, n_features):
    if spec.max_features == "all":
        return n_features
    return max(1, int(math.sqrt(n_features)))


def _best_split_on(x, y, min_leaf):
    """Best (gini, threshold) for one feature column, or None if unsplittable."""
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = len(xs)
    n_left = np.arange(1, n)
    pos_left = np.cumsum(ys)[:-1]
    valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
    if not valid.any():
        return None
    n_right = n - n_left
    p_l = pos_left / n_left
    p_r = (ys.sum() - pos_left) / n_right
    impurity = (n_left * 2.0 * p_l * (1 - p_l) + n_right * 2.0 * p_r * (1 - p_r)) / n
    impurity = np.where(valid, impurity, np.inf)
    i = int(np.argmin(impurity))
    return float(impurity[i]), 0.5 * (xs[i] + xs[i + 1])


def _grow_tree(X, y, spec, rng):
    n_features = X.shape[1]
    k = _n_candidates(spec, n_features)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(len(y)))]
    while stack:
        node, idx = stack.pop()
        ys = y[idx]
        pos = ys.sum()
        value[node] = 1.0 if pos * 2 > len(ys) else 0.0
        if pos == 0 or pos == len(ys) or len(ys) < 2 * spec.min_samples_leaf:
            continue
        candidates = np.sort(rng.choice(n_features, size=k, replace=False))
        best = None
        for attempt in (candidates, np.setdiff1d(np.arange(n_features), candidates)):
            # fall back to the remaining features only if no candidate can split
            for f in attempt:
                found = _best_split_on(X[idx, f], ys, spec.min_samples_leaf)
                if found is not None and (best is None or found[0] < best[0]):
                    best = (found[0], int(f), found[1])
            if best is not None:
                break
        if best is None:
            continue
        _, f, thr = best
        go_left = X[idx, f] <= thr
        feature[node], threshold[node] = f, thr
        l_node, r_node = new_node(), new_node()
        left[node], right[node] = l_node, r_node
        stack.append((r_node, idx[~go_left]))
        stack.append((l_node, idx[go_left]))
    return {
        "feature": np.array(feature, dtype=np.int64),
        "threshold": np.array(threshold),
        "left": np.array(left, dtype=np.int64),
        "right": np.array(right, dtype=np.int64),
        "value": np.array(value),
    }


def _tree_predict(tree, X):
    node = np.zeros(len(X), dtype=np.int64)
    while True:
        f = tree["feature"][node]
        active = f >= 0
        if not active.any():
            return tree["value"][node]
        rows = np.flatnonzero(active)
        go_left = X[rows, f[rows]] <= tree["threshold"][node[rows]]
        node[rows] = np.where(go_left, tree["left"][node[rows]], tree["right"][node[rows]])


class RandomForest:
    def __init__(self, spec, trees=None, n_features=None):
        self.spec = spec
        self.trees = trees or []
        self.n_features = n_features

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y).astype(np.int64).ravel()
        if X.ndim != 2 or len(X) != len(y):
            raise ForestError(f"features {X.shape} and labels {y.shape} disagree")
        if len(np.unique(y)) < 2:
            raise ForestError("random forest needs samples from both classes")
        self.n_features = X.shape[1]
        seeds = np.random.SeedSequence(self.spec.seed).spawn(self.spec.n_trees)
        self.trees = []
        for ss in seeds:
            rng = np.random.default_rng(ss)
            idx = rng.integers(0, len(y), len(y)) if self.spec.bootstrap else np.arange(len(y))
            self.trees.append(_grow_tree(X[idx], y[idx], self.spec, rng))
        return self

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        if not self.trees:
            raise ForestError("forest is not trained")
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ForestError(f"expected (n, {self.n_features}) features, got {X.shape}")
        votes = np.zeros(len(X))
        for tree in self.trees:
            votes += _tree_predict(tree, X)
        return votes / len(self.trees)

    def to_json(self):
        return json.dumps({
            "spec": asdict(self.spec),
            "n_features": self.n_features,
            "trees": [{k: v.tolist() for k, v in t.items()} for t in self.trees],
        }, separators=(",", ":"))

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        trees = [{
            "feature": np.array(t["feature"], dtype=np.int64),
            "threshold": np.array(t["threshold"], dtype=np.float64),
            "left": np.array(t["left"], dtype=np.int64),
            "right": np.array(t["right"], dtype=np.int64),
            "value": np.array(t["value"], dtype=np.float64),
        } for t in d["trees"]]
        return cls(ForestSpec(**d["spec"]), trees, d["n_features"])


def train_random_forest(spec, features, labels):
    return RandomForest(spec).fit(features, labels)


def rf_predict(forest, features):
    return forest.predict_proba(features)
