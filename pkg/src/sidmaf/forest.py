"""From-scratch random decision forest for driver-acceptance prediction.

Binary classification with bootstrap sampling, Gini-impurity split
search and soft-vote probability aggregation (mean of per-tree leaf
accept fractions). Feature importances are mean decrease in impurity
weighted by the fraction of samples reaching each split, averaged over
trees and normalized.

Trees are stored as flat arrays so that batch prediction can walk all
trees for all samples with vectorized indexing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from ._validation import check_array, check_is_fitted, check_X_y
from .features import FEATURE_NAMES

MODEL_SCHEMA_VERSION = 1

_LEAF = -1


def gini(counts) -> float:
    """Gini impurity 1 - sum((c/n)^2) of a two-class count pair."""
    c0, c1 = counts
    n = c0 + c1
    if n == 0:
        raise ValueError("gini undefined for an empty node")
    p0, p1 = c0 / n, c1 / n
    return 1.0 - (p0 * p0 + p1 * p1)


@dataclass
class Tree:
    """Flat-array decision tree. feature == -1 marks a leaf."""

    feature: np.ndarray    # int, per node
    threshold: np.ndarray  # float, per node
    left: np.ndarray       # int node index
    right: np.ndarray      # int node index
    value: np.ndarray      # accept fraction at the node
    n_node: np.ndarray     # training samples reaching the node

    def predict_accept(self, X: np.ndarray) -> np.ndarray:
        idx = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[idx] != _LEAF
        while active.any():
            cur = idx[active]
            f = self.feature[cur]
            go_left = X[np.flatnonzero(active), f] <= self.threshold[cur]
            idx[np.flatnonzero(active)] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[idx] != _LEAF
        return self.value[idx]


class _TreeBuilder:
    def __init__(self, X, y, max_features, max_depth, min_samples_split, rng):
        self.X = X
        self.y = y
        self.max_features = max_features
        self.max_depth = math.inf if max_depth is None else max_depth
        self.min_samples_split = min_samples_split
        self.rng = rng
        self.n_total = X.shape[0]
        self.n_features = X.shape[1]
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []
        self.n_node = []
        self.importance = np.zeros(self.n_features)

    def build(self, idx: np.ndarray) -> Tree:
        self._grow(idx, depth=0)
        return Tree(
            feature=np.array(self.feature, dtype=np.int64),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int64),
            right=np.array(self.right, dtype=np.int64),
            value=np.array(self.value, dtype=np.float64),
            n_node=np.array(self.n_node, dtype=np.int64),
        )

    def _add_node(self, n, accept_frac):
        self.feature.append(_LEAF)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(accept_frac)
        self.n_node.append(n)
        return len(self.feature) - 1

    def _grow(self, idx, depth) -> int:
        y = self.y[idx]
        n = len(idx)
        n1 = int(y.sum())
        node = self._add_node(n, n1 / n)
        impurity = gini((n - n1, n1))
        if (impurity == 0.0 or n < self.min_samples_split
                or depth >= self.max_depth):
            return node

        split = self._best_split(idx, impurity)
        if split is None:
            return node
        f, thr, decrease = split
        self.feature[node] = f
        self.threshold[node] = thr
        self.importance[f] += (n / self.n_total) * decrease

        mask = self.X[idx, f] <= thr
        self.left[node] = self._grow(idx[mask], depth + 1)
        self.right[node] = self._grow(idx[~mask], depth + 1)
        return node

    def _best_split(self, idx, parent_impurity):
        n = len(idx)
        cand = self.rng.choice(self.n_features, size=self.max_features, replace=False)
        best = None  # (cost, feature, threshold)
        for f in np.sort(cand):
            xs = self.X[idx, f]
            order = np.argsort(xs, kind="stable")
            xs_s = xs[order]
            ys_s = self.y[idx][order]
            # split points between distinct adjacent values only
            boundary = np.flatnonzero(xs_s[1:] != xs_s[:-1])
            if len(boundary) == 0:
                continue
            n_left = boundary + 1
            ones_left = np.cumsum(ys_s)[boundary].astype(np.float64)
            n_right = n - n_left
            ones_right = ys_s.sum() - ones_left
            p1l = ones_left / n_left
            p1r = ones_right / n_right
            gini_l = 1.0 - (p1l * p1l + (1 - p1l) * (1 - p1l))
            gini_r = 1.0 - (p1r * p1r + (1 - p1r) * (1 - p1r))
            cost = (n_left * gini_l + n_right * gini_r) / n
            j = int(np.argmin(cost))  # first minimum = lowest threshold
            # strict comparison keeps lowest feature index on ties
            if best is None or cost[j] < best[0] - 1e-15:
                thr = (xs_s[boundary[j]] + xs_s[boundary[j] + 1]) / 2.0
                best = (float(cost[j]), int(f), float(thr))
        if best is None or best[0] >= parent_impurity - 1e-12:
            return None
        return best[1], best[2], parent_impurity - best[0]


def _resolve_max_features(max_features, n_features: int) -> int:
    if max_features == "sqrt":
        return max(1, math.ceil(math.sqrt(n_features)))
    if max_features is None:
        return n_features
    return min(int(max_features), n_features)


def _fit_one_tree(X, y, seed, max_features, max_depth, min_samples_split):
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, X.shape[0], size=X.shape[0])
    builder = _TreeBuilder(X, y, max_features, max_depth, min_samples_split, rng)
    tree = builder.build(np.sort(idx))
    return tree, builder.importance


class AcceptanceForest:
    """Random forest classifier with an sklearn-style fit/predict API.

    Defaults follow common classification practice: sqrt(p) candidate
    features per split, bootstrap sample of the full training size,
    unlimited depth, min_samples_split=2. Per-tree seeds are derived as
    master_seed XOR tree_index, so results do not depend on n_jobs.
    """

    def __init__(self, n_trees=200, max_features="sqrt", max_depth=None,
                 min_samples_split=2, seed=0, n_jobs=1):
        self.n_trees = n_trees
        self.max_features = max_features
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.seed = seed
        self.n_jobs = n_jobs

    # -- sklearn-compatible parameter plumbing ------------------------------
    _param_names = ("n_trees", "max_features", "max_depth",
                    "min_samples_split", "seed", "n_jobs")

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names}

    def set_params(self, **params):
        for name, value in params.items():
            if name not in self._param_names:
                raise ValueError(f"unknown parameter {name!r}")
            setattr(self, name, value)
        return self

    # -----------------------------------------------------------------------
    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        n_features = X.shape[1]
        k = _resolve_max_features(self.max_features, n_features)
        degenerate = len(np.unique(y)) < 2

        seeds = [self.seed ^ i for i in range(self.n_trees)]
        if self.n_jobs == 1:
            results = [_fit_one_tree(X, y, s, k, self.max_depth,
                                     self.min_samples_split) for s in seeds]
        else:
            results = Parallel(n_jobs=self.n_jobs)(
                delayed(_fit_one_tree)(X, y, s, k, self.max_depth,
                                       self.min_samples_split) for s in seeds)
        self.trees_ = [t for t, _ in results]
        raw = np.mean([imp for _, imp in results], axis=0)
        total = raw.sum()
        self.feature_importances_ = raw / total if total > 0 else raw
        self.n_features_ = n_features
        self.classes_ = np.array([0, 1])
        self.train_meta_ = {
            "seed": self.seed,
            "n_samples": int(X.shape[0]),
            "degenerate_single_class": bool(degenerate),
            # n_jobs omitted: an execution detail, not part of the model
            "params": {k: v for k, v in self.get_params().items()
                       if k != "n_jobs"},
        }
        self._build_arena()
        return self

    def _build_arena(self):
        """Concatenate all trees into one node arena for batch prediction."""
        offsets = np.cumsum([0] + [len(t.feature) for t in self.trees_[:-1]])
        self._roots = offsets.astype(np.int64)
        self._af = np.concatenate([t.feature for t in self.trees_])
        self._at = np.concatenate([t.threshold for t in self.trees_])
        self._al = np.concatenate([
            np.where(t.left >= 0, t.left + off, 0)
            for t, off in zip(self.trees_, offsets)]).astype(np.int64)
        self._ar = np.concatenate([
            np.where(t.right >= 0, t.right + off, 0)
            for t, off in zip(self.trees_, offsets)]).astype(np.int64)
        self._av = np.concatenate([t.value for t in self.trees_])

    def accept_proba(self, X) -> np.ndarray:
        """P(accept) per row: mean leaf accept fraction over trees."""
        check_is_fitted(self, "trees_")
        X = check_array(X)
        n = X.shape[0]
        t = len(self.trees_)
        ptr = np.broadcast_to(self._roots, (n, t)).copy().ravel()
        sample = np.repeat(np.arange(n), t)
        active = np.flatnonzero(self._af[ptr] != _LEAF)
        while len(active):
            cur = ptr[active]
            f = self._af[cur]
            go_left = X[sample[active], f] <= self._at[cur]
            ptr[active] = np.where(go_left, self._al[cur], self._ar[cur])
            active = active[self._af[ptr[active]] != _LEAF]
        return self._av[ptr].reshape(n, t).mean(axis=1)

    def predict_proba(self, X) -> np.ndarray:
        p1 = self.accept_proba(X)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X) -> np.ndarray:
        return (self.accept_proba(X) > 0.5).astype(np.int64)

    # -- persistence --------------------------------------------------------
    def to_dict(self) -> dict:
        check_is_fitted(self, "trees_")
        # n_jobs is an execution detail, not part of the learned model
        params = {k: v for k, v in self.get_params().items() if k != "n_jobs"}
        return {
            "schema_version": MODEL_SCHEMA_VERSION,
            "params": params,
            "feature_names": list(FEATURE_NAMES),
            "feature_importances": self.feature_importances_.tolist(),
            "train_meta": self.train_meta_,
            "trees": [
                {"feature": t.feature.tolist(),
                 "threshold": t.threshold.tolist(),
                 "left": t.left.tolist(),
                 "right": t.right.tolist(),
                 "value": t.value.tolist(),
                 "n_node": t.n_node.tolist()}
                for t in self.trees_
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "AcceptanceForest":
        if obj.get("schema_version") != MODEL_SCHEMA_VERSION:
            raise ValueError(
                f"unsupported model schema version {obj.get('schema_version')}")
        model = cls(**obj["params"])
        model.trees_ = [
            Tree(feature=np.array(t["feature"], dtype=np.int64),
                 threshold=np.array(t["threshold"], dtype=np.float64),
                 left=np.array(t["left"], dtype=np.int64),
                 right=np.array(t["right"], dtype=np.int64),
                 value=np.array(t["value"], dtype=np.float64),
                 n_node=np.array(t["n_node"], dtype=np.int64))
            for t in obj["trees"]
        ]
        model.feature_importances_ = np.array(obj["feature_importances"])
        model.n_features_ = len(obj["feature_names"])
        model.classes_ = np.array([0, 1])
        model.train_meta_ = obj["train_meta"]
        model._build_arena()
        return model

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, sort_keys=True)

    @classmethod
    def load(cls, path) -> "AcceptanceForest":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def feature_ranking(model: AcceptanceForest):
    """(name, importance) pairs sorted by descending importance; ties keep
    the declared feature order."""
    check_is_fitted(model, "feature_importances_")
    order = np.argsort(-model.feature_importances_, kind="stable")
    return [(FEATURE_NAMES[i], float(model.feature_importances_[i])) for i in order]


# -- cross-validation -------------------------------------------------------

@dataclass
class CvReport:
    folds: int
    accuracy: float
    f1: float
    per_fold: list = field(default_factory=list)


def accuracy_score(y_true, y_pred) -> float:
    return float(np.mean(np.asarray(y_true) == np.asarray(y_pred)))


def f1_score(y_true, y_pred) -> float:
    """F1 for the accept (positive) class; 0.0 when undefined."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def stratified_fold_ids(y, folds: int, seed: int) -> np.ndarray:
    """Deterministic stratified assignment: shuffle within each class,
    deal round-robin into folds."""
    rng = np.random.default_rng(seed)
    fold_ids = np.empty(len(y), dtype=np.int64)
    for cls in np.unique(y):
        members = np.flatnonzero(np.asarray(y) == cls)
        rng.shuffle(members)
        fold_ids[members] = np.arange(len(members)) % folds
    return fold_ids


def cross_validate(X, y, folds: int, hp: dict | None = None, seed: int = 0) -> CvReport:
    X, y = check_X_y(X, y)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if len(y) < folds:
        raise ValueError(f"need at least {folds} samples for {folds} folds")
    hp = dict(hp or {})
    hp.pop("seed", None)
    fold_ids = stratified_fold_ids(y, folds, seed)
    per_fold = []
    for k in range(folds):
        test = fold_ids == k
        model = AcceptanceForest(**hp, seed=seed + 1000 * (k + 1))
        model.fit(X[~test], y[~test])
        pred = model.predict(X[test])
        per_fold.append((accuracy_score(y[test], pred), f1_score(y[test], pred)))
    return CvReport(
        folds=folds,
        accuracy=float(np.mean([a for a, _ in per_fold])),
        f1=float(np.mean([f for _, f in per_fold])),
        per_fold=per_fold,
    )
