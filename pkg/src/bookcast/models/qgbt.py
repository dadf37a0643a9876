"""Histogram gradient-boosted trees with quantile leaves, one ensemble per
quantile level.

Trees grow depth-wise on 256-bin feature histograms. Splits maximize the
variance-style gain of the pinball-loss gradient (which depends only on the
residual sign), and each leaf is then re-valued as the pinball-minimizing
quantile of the raw residuals it holds, so every boosting step can only
reduce the training pinball loss when no subsampling is active. reg_alpha
soft-thresholds leaf values and reg_lambda shrinks them by n/(n + lambda)
before the learning rate is applied.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..util import pinball_quantile, rng_for, soft_threshold
from .base import QuantileModel, TrainReport, pinball


@dataclass
class _Tree:
    feature: np.ndarray    # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        pos = np.zeros(X.shape[0], dtype=np.intp)
        while True:
            f = self.feature[pos]
            internal = f >= 0
            if not internal.any():
                return self.value[pos]
            idx = np.flatnonzero(internal)
            node = pos[idx]
            go_left = X[idx, f[idx]] <= self.threshold[node]
            pos[idx] = np.where(go_left, self.left[node], self.right[node])


class QGBTModel(QuantileModel):
    family = "qgbt"

    def __init__(self, quantiles, seed: int = 0, n_estimators: int = 100,
                 max_depth: int = 6, learning_rate: float = 0.1,
                 subsample: float = 1.0, colsample_by_tree: float = 1.0,
                 reg_alpha: float = 0.0, reg_lambda: float = 0.0,
                 max_bins: int = 256):
        super().__init__(quantiles, seed)
        if n_estimators < 1:
            raise ValueError("n_estimators must be at least 1")
        if max_depth < 0:
            raise ValueError("max_depth must be non-negative")
        if learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < subsample <= 1.0 or not 0.0 < colsample_by_tree <= 1.0:
            raise ValueError("subsample and colsample_by_tree must be in (0, 1]")
        if reg_alpha < 0 or reg_lambda < 0:
            raise ValueError("regularization weights must be non-negative")
        if max_bins < 2:
            raise ValueError("max_bins must be at least 2")
        self.n_estimators = int(n_estimators)
        self.max_depth = int(max_depth)
        self.learning_rate = float(learning_rate)
        self.subsample = float(subsample)
        self.colsample_by_tree = float(colsample_by_tree)
        self.reg_alpha = float(reg_alpha)
        self.reg_lambda = float(reg_lambda)
        self.max_bins = int(max_bins)
        self._base: Optional[np.ndarray] = None
        self._trees: Optional[List[List[_Tree]]] = None  # [tau][iteration]

    def _bin_features(self, X: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
        edges_per_feature = []
        binned = np.empty(X.shape, dtype=np.int16)
        probe = np.linspace(0.0, 1.0, self.max_bins + 1)[1:-1]
        for j in range(X.shape[1]):
            edges = np.unique(np.quantile(X[:, j], probe))
            edges_per_feature.append(edges)
            binned[:, j] = np.searchsorted(edges, X[:, j], side="left")
        return edges_per_feature, binned

    def _grow_tree(self, binned, edges, residual, grad, rows, feats,
                   n_bins_by_feat) -> _Tree:
        feature, threshold, left, right, value = [], [], [], [], []

        def new_node():
            feature.append(-1)
            threshold.append(np.nan)
            left.append(-1)
            right.append(-1)
            value.append(np.nan)
            return len(feature) - 1

        def leaf_value(node_rows) -> float:
            v = pinball_quantile(residual[node_rows], self._current_tau)
            v = float(soft_threshold(np.array([v]), self.reg_alpha)[0])
            n = node_rows.size
            v *= n / (n + self.reg_lambda)
            return v * self.learning_rate

        root = new_node()
        queue = [(root, rows, 0)]
        while queue:
            node, node_rows, depth = queue.pop(0)
            if depth >= self.max_depth or node_rows.size < 2:
                value[node] = leaf_value(node_rows)
                continue
            g = grad[node_rows]
            total_sum = float(g.sum())
            total_cnt = node_rows.size
            parent_score = total_sum * total_sum / total_cnt
            best_gain = 1e-12
            best = None
            for f in feats:
                nb = n_bins_by_feat[f]
                if nb < 2:
                    continue
                b = binned[node_rows, f]
                cnt = np.bincount(b, minlength=nb)
                sums = np.bincount(b, weights=g, minlength=nb)
                cnt_l = np.cumsum(cnt)[:-1]
                sum_l = np.cumsum(sums)[:-1]
                cnt_r = total_cnt - cnt_l
                sum_r = total_sum - sum_l
                valid = (cnt_l > 0) & (cnt_r > 0)
                if not valid.any():
                    continue
                with np.errstate(divide="ignore", invalid="ignore"):
                    gain = np.where(
                        valid,
                        sum_l ** 2 / cnt_l + sum_r ** 2 / cnt_r - parent_score,
                        -np.inf)
                k = int(np.argmax(gain))
                if gain[k] > best_gain:
                    best_gain = float(gain[k])
                    best = (f, k)
            if best is None:
                value[node] = leaf_value(node_rows)
                continue
            f, k = best
            mask = binned[node_rows, f] <= k
            left_rows = node_rows[mask]
            right_rows = node_rows[~mask]
            feature[node] = f
            threshold[node] = float(edges[f][k])
            left[node] = new_node()
            right[node] = new_node()
            queue.append((left[node], left_rows, depth + 1))
            queue.append((right[node], right_rows, depth + 1))

        return _Tree(np.array(feature, dtype=np.intp),
                     np.array(threshold, dtype=float),
                     np.array(left, dtype=np.intp),
                     np.array(right, dtype=np.intp),
                     np.array(value, dtype=float))

    def fit(self, X, y, X_val=None, y_val=None) -> TrainReport:
        t0 = time.perf_counter()
        X = self._check_matrix(X)
        y = np.asarray(y, dtype=float)
        n, d = X.shape
        edges, binned = self._bin_features(X)
        n_bins_by_feat = np.array([e.size + 1 for e in edges])
        n_sub = max(1, int(round(self.subsample * n)))
        n_feat = max(1, int(round(self.colsample_by_tree * d))) if d else 0

        self._base = np.array([pinball_quantile(y, t) for t in self.quantiles])
        self._trees = [[] for _ in self.quantiles]
        traces = np.zeros((len(self.quantiles), self.n_estimators))
        for qi, tau in enumerate(self.quantiles):
            self._current_tau = tau
            rng = rng_for(self.seed, qi)
            pred = np.full(n, self._base[qi])
            for m in range(self.n_estimators):
                rows = (np.arange(n) if n_sub == n
                        else np.sort(rng.choice(n, size=n_sub, replace=False)))
                feats = (np.arange(d) if n_feat == d
                         else np.sort(rng.choice(d, size=n_feat, replace=False)))
                residual = y - pred
                grad = np.where(residual >= 0, tau, tau - 1.0)
                tree = self._grow_tree(binned, edges, residual, grad,
                                       rows, feats, n_bins_by_feat)
                self._trees[qi].append(tree)
                pred += tree.apply(X)
                traces[qi, m] = float(np.mean(pinball(y, pred, tau)))
        del self._current_tau
        return TrainReport(loss_trace=list(traces.mean(axis=0)),
                           wall_time=time.perf_counter() - t0)

    def predict(self, X) -> np.ndarray:
        if self._trees is None:
            raise RuntimeError("model is not fitted")
        X = self._check_matrix(X)
        out = np.empty((X.shape[0], len(self.quantiles)))
        for qi in range(len(self.quantiles)):
            pred = np.full(X.shape[0], self._base[qi])
            for tree in self._trees[qi]:
                pred += tree.apply(X)
            out[:, qi] = pred
        return out

    def config(self) -> dict:
        return {"n_estimators": self.n_estimators, "max_depth": self.max_depth,
                "learning_rate": self.learning_rate, "subsample": self.subsample,
                "colsample_by_tree": self.colsample_by_tree,
                "reg_alpha": self.reg_alpha, "reg_lambda": self.reg_lambda,
                "max_bins": self.max_bins}

    def state(self) -> Tuple[dict, Dict[str, np.ndarray]]:
        if self._trees is None:
            raise RuntimeError("model is not fitted")
        meta = {"family": self.family, "quantiles": list(self.quantiles),
                "seed": self.seed, "config": self.config(),
                "trees_per_tau": [len(ts) for ts in self._trees]}
        arrays: Dict[str, np.ndarray] = {"base": self._base}
        chunks = {k: [] for k in ("feature", "threshold", "left", "right", "value")}
        starts = [0]
        for ts in self._trees:
            for tree in ts:
                chunks["feature"].append(tree.feature)
                chunks["threshold"].append(tree.threshold)
                chunks["left"].append(tree.left)
                chunks["right"].append(tree.right)
                chunks["value"].append(tree.value)
                starts.append(starts[-1] + tree.feature.size)
        for k, parts in chunks.items():
            arrays[k] = np.concatenate(parts) if parts else np.empty(0)
        arrays["tree_start"] = np.array(starts, dtype=np.int64)
        return meta, arrays

    @classmethod
    def from_state(cls, meta, arrays) -> "QGBTModel":
        model = cls(meta["quantiles"], seed=meta["seed"], **meta["config"])
        model._base = arrays["base"]
        starts = arrays["tree_start"]
        flat: List[_Tree] = []
        for i in range(starts.size - 1):
            lo, hi = int(starts[i]), int(starts[i + 1])
            flat.append(_Tree(arrays["feature"][lo:hi].astype(np.intp),
                              arrays["threshold"][lo:hi],
                              arrays["left"][lo:hi].astype(np.intp),
                              arrays["right"][lo:hi].astype(np.intp),
                              arrays["value"][lo:hi]))
        model._trees = []
        pos = 0
        for count in meta["trees_per_tau"]:
            model._trees.append(flat[pos: pos + count])
            pos += count
        return model
