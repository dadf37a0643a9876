"""Quantile k-nearest-neighbors regression.

Predictions are empirical quantiles of the k nearest training targets.
Uniform weighting interpolates linearly between order statistics; distance
weighting uses weights 1/(d + 1e-12) and returns the smallest target whose
cumulative normalized weight reaches tau. Distance ties break by training
index for determinism.
"""

from __future__ import annotations

import time
from typing import Dict, Optional, Tuple

import numpy as np

from ..util import weighted_quantile_geq
from .base import QuantileModel, TrainReport

METRICS = ("euclidean", "manhattan")
WEIGHTINGS = ("uniform", "distance")
DISTANCE_EPS = 1e-12


class QKNNModel(QuantileModel):
    family = "qknn"

    def __init__(self, quantiles, seed: int = 0, n_neighbors: int = 5,
                 metric: str = "euclidean", weights: str = "uniform"):
        super().__init__(quantiles, seed)
        if n_neighbors < 1:
            raise ValueError("n_neighbors must be at least 1")
        if metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if weights not in WEIGHTINGS:
            raise ValueError(f"weights must be one of {WEIGHTINGS}")
        self.n_neighbors = int(n_neighbors)
        self.metric = metric
        self.weights = weights
        self._X: Optional[np.ndarray] = None
        self._y: Optional[np.ndarray] = None

    def fit(self, X, y, X_val=None, y_val=None) -> TrainReport:
        t0 = time.perf_counter()
        X = self._check_matrix(X)
        y = np.asarray(y, dtype=float)
        if self.n_neighbors > X.shape[0]:
            raise ValueError(
                f"n_neighbors={self.n_neighbors} exceeds training size {X.shape[0]}")
        self._X = X.copy()
        self._y = y.copy()
        return TrainReport(loss_trace=[0.0], wall_time=time.perf_counter() - t0)

    def _distances(self, X: np.ndarray) -> np.ndarray:
        if self.metric == "euclidean":
            d2 = (np.sum(X ** 2, axis=1)[:, None]
                  + np.sum(self._X ** 2, axis=1)[None, :]
                  - 2.0 * X @ self._X.T)
            return np.sqrt(np.maximum(d2, 0.0))
        return np.sum(np.abs(X[:, None, :] - self._X[None, :, :]), axis=2)

    def predict(self, X) -> np.ndarray:
        if self._X is None:
            raise RuntimeError("model is not fitted")
        X = self._check_matrix(X)
        taus = np.array(self.quantiles)
        out = np.empty((X.shape[0], taus.size))
        # manhattan materializes (rows, n_train, n_features); budget for it
        per_row = self._X.shape[0] * (self._X.shape[1] if self.metric == "manhattan" else 1)
        chunk = max(1, int(2e7 // max(1, per_row)))
        for lo in range(0, X.shape[0], chunk):
            block = X[lo: lo + chunk]
            dists = self._distances(block)
            order = np.argsort(dists, axis=1, kind="stable")[:, : self.n_neighbors]
            for i in range(block.shape[0]):
                neigh_y = self._y[order[i]]
                if self.weights == "uniform":
                    out[lo + i] = np.quantile(neigh_y, taus)
                else:
                    w = 1.0 / (dists[i, order[i]] + DISTANCE_EPS)
                    out[lo + i] = [weighted_quantile_geq(neigh_y, w, t) for t in taus]
        return out

    def config(self) -> dict:
        return {"n_neighbors": self.n_neighbors, "metric": self.metric,
                "weights": self.weights}

    def state(self) -> Tuple[dict, Dict[str, np.ndarray]]:
        if self._X is None:
            raise RuntimeError("model is not fitted")
        meta = {"family": self.family, "quantiles": list(self.quantiles),
                "seed": self.seed, "config": self.config()}
        return meta, {"X": self._X, "y": self._y}

    @classmethod
    def from_state(cls, meta, arrays) -> "QKNNModel":
        model = cls(meta["quantiles"], seed=meta["seed"], **meta["config"])
        model._X = arrays["X"]
        model._y = arrays["y"]
        return model
