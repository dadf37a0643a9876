"""Feedforward quantile network: shared ReLU trunk, one linear head per
quantile level, trained jointly on the mean pinball loss across heads.

Pure numpy: forward, backprop, inverted dropout, and Adam are implemented
here so gradients can be checked against finite differences. Training uses
mini-batches with early stopping on validation AQL (patience 10) and
restores the best-epoch weights.
"""

from __future__ import annotations

import time
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..metrics import aql
from ..util import rng_for
from .base import QuantileModel, TrainReport

MAX_EPOCHS = 500
PATIENCE = 10
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class QMLPModel(QuantileModel):
    family = "qmlp"

    def __init__(self, quantiles, seed: int = 0, hidden_size: int = 64,
                 n_layers: int = 2, dropout_rate: float = 0.0,
                 learning_rate: float = 1e-3, batch_size: int = 64,
                 max_epochs: int = MAX_EPOCHS, patience: int = PATIENCE,
                 lr_decay: float = 0.0):
        super().__init__(quantiles, seed)
        if hidden_size < 1 or n_layers < 1:
            raise ValueError("hidden_size and n_layers must be positive")
        if not 0.0 <= dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if learning_rate <= 0 or batch_size < 1:
            raise ValueError("learning_rate and batch_size must be positive")
        if lr_decay < 0:
            raise ValueError("lr_decay must be non-negative")
        self.hidden_size = int(hidden_size)
        self.n_layers = int(n_layers)
        self.dropout_rate = float(dropout_rate)
        self.learning_rate = float(learning_rate)
        self.batch_size = int(batch_size)
        self.max_epochs = int(max_epochs)
        self.patience = int(patience)
        self.lr_decay = float(lr_decay)
        self._weights: Optional[List[np.ndarray]] = None
        self._biases: Optional[List[np.ndarray]] = None

    def _init_params(self, n_features: int) -> None:
        rng = rng_for(self.seed, 0)
        sizes = [n_features] + [self.hidden_size] * self.n_layers + [len(self.quantiles)]
        self._weights = []
        self._biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self._weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self._biases.append(rng.uniform(-bound, bound, size=fan_out))

    def _forward(self, X: np.ndarray, dropout_rng=None):
        """Returns (output, cache) with per-layer inputs and dropout masks."""
        acts = [X]
        masks = []
        h = X
        for l in range(self.n_layers):
            z = h @ self._weights[l] + self._biases[l]
            h = np.maximum(z, 0.0)
            if dropout_rng is not None and self.dropout_rate > 0.0:
                mask = (dropout_rng.random(h.shape) >= self.dropout_rate)
                h = h * mask / (1.0 - self.dropout_rate)
                masks.append(mask)
            else:
                masks.append(None)
            acts.append(h)
        out = h @ self._weights[-1] + self._biases[-1]
        return out, (acts, masks)

    def _loss_grad_out(self, y: np.ndarray, out: np.ndarray) -> Tuple[float, np.ndarray]:
        taus = np.array(self.quantiles)
        diff = y[:, None] - out
        losses = np.where(diff >= 0, taus * diff, (taus - 1.0) * diff)
        loss = float(losses.mean())
        scale = 1.0 / losses.size
        grad = np.where(diff >= 0, -taus, 1.0 - taus) * scale
        return loss, grad

    def _backward(self, acts, masks, g: np.ndarray) -> List[np.ndarray]:
        """Parameter gradients from d(loss)/d(output); order matches parameters().

        Post-dropout activations are zero wherever a unit was dropped or the
        ReLU was inactive, so (activation > 0) recovers the exact ReLU gate
        on the surviving units.
        """
        grads_w = [None] * len(self._weights)
        grads_b = [None] * len(self._biases)
        grads_w[-1] = acts[-1].T @ g
        grads_b[-1] = g.sum(axis=0)
        upstream = g @ self._weights[-1].T
        for l in range(self.n_layers - 1, -1, -1):
            if masks[l] is not None:
                upstream = upstream * masks[l] / (1.0 - self.dropout_rate)
            upstream = upstream * (acts[l + 1] > 0)
            grads_w[l] = acts[l].T @ upstream
            grads_b[l] = upstream.sum(axis=0)
            if l > 0:
                upstream = upstream @ self._weights[l].T
        grads = []
        for w, b in zip(grads_w, grads_b):
            grads.extend([w, b])
        return grads

    def loss_and_grads(self, X: np.ndarray, y: np.ndarray):
        """Full-batch loss and analytic parameter gradients, dropout off."""
        out, (acts, masks) = self._forward(np.asarray(X, dtype=float))
        loss, g = self._loss_grad_out(np.asarray(y, dtype=float), out)
        return loss, self._backward(acts, masks, g)

    def parameters(self) -> List[np.ndarray]:
        params = []
        for w, b in zip(self._weights, self._biases):
            params.extend([w, b])
        return params

    def fit(self, X, y, X_val=None, y_val=None) -> TrainReport:
        t0 = time.perf_counter()
        X = self._check_matrix(X)
        y = np.asarray(y, dtype=float)
        n = X.shape[0]
        self._init_params(X.shape[1])
        shuffle_rng = rng_for(self.seed, 1)
        dropout_rng = rng_for(self.seed, 2)
        batch = min(self.batch_size, n)

        params = self.parameters()
        m_state = [np.zeros_like(p) for p in params]
        v_state = [np.zeros_like(p) for p in params]
        step = 0

        report = TrainReport()
        best_val = np.inf
        best_params = None
        best_epoch = 0
        wait = 0
        for epoch in range(1, self.max_epochs + 1):
            # 1/t schedule; the pinball gradient never vanishes at the optimum,
            # so a decaying step is what makes tight convergence possible
            lr = self.learning_rate / (1.0 + self.lr_decay * (epoch - 1))
            order = shuffle_rng.permutation(n)
            epoch_loss = 0.0
            for lo in range(0, n, batch):
                idx = order[lo: lo + batch]
                out, (acts, masks) = self._forward(
                    X[idx], dropout_rng if self.dropout_rate > 0 else None)
                loss, g = self._loss_grad_out(y[idx], out)
                if not np.isfinite(loss):
                    raise RuntimeError(
                        f"non-finite training loss at epoch {epoch} "
                        f"(learning_rate={self.learning_rate})")
                epoch_loss += loss * idx.size

                grads = self._backward(acts, masks, g)
                step += 1
                for p, grad, m, v in zip(params, grads, m_state, v_state):
                    m *= ADAM_BETA1
                    m += (1 - ADAM_BETA1) * grad
                    v *= ADAM_BETA2
                    v += (1 - ADAM_BETA2) * grad ** 2
                    m_hat = m / (1 - ADAM_BETA1 ** step)
                    v_hat = v / (1 - ADAM_BETA2 ** step)
                    p -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)

            report.loss_trace.append(epoch_loss / n)
            if X_val is not None and y_val is not None and len(y_val):
                val_aql = aql(y_val, self.predict(X_val), self.quantiles)
                report.val_aql_trace.append(val_aql)
                if val_aql < best_val:
                    best_val = val_aql
                    best_params = [p.copy() for p in params]
                    best_epoch = epoch
                    wait = 0
                else:
                    wait += 1
                    if wait >= self.patience:
                        break

        if best_params is not None:
            for p, bp in zip(params, best_params):
                p[...] = bp
            report.early_stop_epoch = best_epoch
        else:
            report.early_stop_epoch = len(report.loss_trace)
        report.wall_time = time.perf_counter() - t0
        return report

    def predict(self, X) -> np.ndarray:
        if self._weights is None:
            raise RuntimeError("model is not fitted")
        out, _ = self._forward(self._check_matrix(X))
        return out

    def config(self) -> dict:
        return {"hidden_size": self.hidden_size, "n_layers": self.n_layers,
                "dropout_rate": self.dropout_rate,
                "learning_rate": self.learning_rate,
                "batch_size": self.batch_size, "max_epochs": self.max_epochs,
                "patience": self.patience, "lr_decay": self.lr_decay}

    def state(self) -> Tuple[dict, Dict[str, np.ndarray]]:
        if self._weights is None:
            raise RuntimeError("model is not fitted")
        meta = {"family": self.family, "quantiles": list(self.quantiles),
                "seed": self.seed, "config": self.config(),
                "n_layers_total": len(self._weights)}
        arrays = {}
        for i, (w, b) in enumerate(zip(self._weights, self._biases)):
            arrays[f"W{i}"] = w
            arrays[f"b{i}"] = b
        return meta, arrays

    @classmethod
    def from_state(cls, meta, arrays) -> "QMLPModel":
        model = cls(meta["quantiles"], seed=meta["seed"], **meta["config"])
        total = meta["n_layers_total"]
        model._weights = [arrays[f"W{i}"] for i in range(total)]
        model._biases = [arrays[f"b{i}"] for i in range(total)]
        return model
