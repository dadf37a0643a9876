"""Shared quantile-model contract.

Every family exposes fit(X, y, X_val, y_val) -> TrainReport and
predict(X) -> (N, |Q|) with columns ordered by ascending quantile level.
Predicted quantiles may cross; crossing is measured downstream, never
clipped away here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..metrics import pinball  # noqa: F401  (re-exported: the loss lives with the metrics)


@dataclass
class TrainReport:
    loss_trace: List[float] = field(default_factory=list)
    val_aql_trace: List[float] = field(default_factory=list)
    early_stop_epoch: Optional[int] = None
    wall_time: float = 0.0


class QuantileModel:
    """Base class; subclasses set ``family`` and implement the contract."""

    family: str = ""

    def __init__(self, quantiles, seed: int = 0):
        q = tuple(float(t) for t in quantiles)
        if list(q) != sorted(q) or len(set(q)) != len(q):
            raise ValueError("quantiles must be strictly ascending")
        if not all(0.0 < t < 1.0 for t in q):
            raise ValueError("quantiles must lie in (0, 1)")
        self.quantiles: Tuple[float, ...] = q
        self.seed = int(seed)

    def fit(self, X: np.ndarray, y: np.ndarray,
            X_val: Optional[np.ndarray] = None,
            y_val: Optional[np.ndarray] = None) -> TrainReport:
        raise NotImplementedError

    def predict(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def config(self) -> dict:
        raise NotImplementedError

    def state(self) -> Tuple[dict, Dict[str, np.ndarray]]:
        """(meta, arrays) snapshot sufficient to reproduce predictions."""
        raise NotImplementedError

    @classmethod
    def from_state(cls, meta: dict, arrays: Dict[str, np.ndarray]) -> "QuantileModel":
        raise NotImplementedError

    def _check_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ValueError(f"expected a 2-D feature matrix, got shape {X.shape}")
        return X
