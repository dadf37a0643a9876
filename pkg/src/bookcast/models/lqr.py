"""Linear quantile regression, one L1-penalized linear model per quantile.

l1_weight is a per-sample penalty weight: the solver's summed-loss
objective receives it scaled by the training count, so a given weight has
the same shrinkage effect regardless of dataset size.
"""

from __future__ import annotations

import time
from typing import Dict, Optional, Tuple

import numpy as np

from ..selection import SolverConfig, fit_l1_lqr
from .base import QuantileModel, TrainReport


class LQRModel(QuantileModel):
    family = "lqr"

    def __init__(self, quantiles, seed: int = 0, l1_weight: float = 1e-8,
                 solver: Optional[SolverConfig] = None):
        super().__init__(quantiles, seed)
        if l1_weight < 0:
            raise ValueError("l1_weight must be non-negative")
        self.l1_weight = float(l1_weight)
        self.solver = solver or SolverConfig()
        self._beta: Optional[np.ndarray] = None      # (|Q|, D)
        self._intercept: Optional[np.ndarray] = None

    def fit(self, X, y, X_val=None, y_val=None) -> TrainReport:
        t0 = time.perf_counter()
        X = self._check_matrix(X)
        y = np.asarray(y, dtype=float)
        betas = []
        intercepts = []
        final_objectives = []
        for tau in self.quantiles:
            fit = fit_l1_lqr(X, y, tau, self.l1_weight * len(y), self.solver)
            betas.append(fit.beta)
            intercepts.append(fit.intercept)
            final_objectives.append(fit.objective_trace[-1])
        self._beta = np.vstack(betas) if betas else np.empty((0, X.shape[1]))
        self._intercept = np.array(intercepts)
        return TrainReport(loss_trace=final_objectives,
                           wall_time=time.perf_counter() - t0)

    def predict(self, X) -> np.ndarray:
        if self._beta is None:
            raise RuntimeError("model is not fitted")
        X = self._check_matrix(X)
        return X @ self._beta.T + self._intercept

    def config(self) -> dict:
        return {"l1_weight": self.l1_weight}

    def state(self) -> Tuple[dict, Dict[str, np.ndarray]]:
        if self._beta is None:
            raise RuntimeError("model is not fitted")
        meta = {"family": self.family, "quantiles": list(self.quantiles),
                "seed": self.seed, "config": self.config()}
        return meta, {"beta": self._beta, "intercept": self._intercept}

    @classmethod
    def from_state(cls, meta, arrays) -> "LQRModel":
        model = cls(meta["quantiles"], seed=meta["seed"], **meta["config"])
        model._beta = arrays["beta"]
        model._intercept = arrays["intercept"]
        return model
