"""Single-hidden-layer MLP regressor trained with Adam and early stopping.

Implements the numerics behind the ``mlp_direct`` family: tanh hidden
layer, MSE loss, bias-corrected Adam updates, patience-based early
stopping with best-weight restore. Everything runs on plain float64
numpy arrays so gradients can be checked against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import derive_stream, normal, permutation


@dataclass
class TrainHistory:
    """Per-epoch losses and the epoch whose weights were kept."""

    train_mse: list[float]
    val_mse: list[float]
    best_epoch: int


def init_params(d_in: int, hidden: int, d_out: int, seed: int) -> dict[str, np.ndarray]:
    """Glorot-style normal initialization from the model's own stream."""
    rng = derive_stream(seed, "mlp-init")
    w1 = normal(rng, d_in * hidden).reshape(d_in, hidden) * np.sqrt(2.0 / (d_in + hidden))
    w2 = normal(rng, hidden * d_out).reshape(hidden, d_out) * np.sqrt(2.0 / (hidden + d_out))
    return {"w1": w1, "b1": np.zeros(hidden), "w2": w2, "b2": np.zeros(d_out)}


def forward(params: dict[str, np.ndarray], x: np.ndarray) -> np.ndarray:
    hidden = np.tanh(x @ params["w1"] + params["b1"])
    return hidden @ params["w2"] + params["b2"]


def loss_and_grad(params: dict[str, np.ndarray], x: np.ndarray, y: np.ndarray):
    """MSE loss (mean over all outputs) and its gradient w.r.t. every parameter."""
    hidden = np.tanh(x @ params["w1"] + params["b1"])
    pred = hidden @ params["w2"] + params["b2"]
    diff = pred - y
    loss = float(np.mean(diff**2))
    d_pred = 2.0 * diff / diff.size
    d_hidden = d_pred @ params["w2"].T
    d_pre = d_hidden * (1.0 - hidden**2)
    grads = {
        "w2": hidden.T @ d_pred,
        "b2": d_pred.sum(axis=0),
        "w1": x.T @ d_pre,
        "b1": d_pre.sum(axis=0),
    }
    return loss, grads


class AdamState:
    """First/second moment accumulators for one parameter set."""

    def __init__(self, params: dict[str, np.ndarray]):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def update(self, params, grads, lr, beta1, beta2, eps):
        self.t += 1
        for key, grad in grads.items():
            self.m[key] = beta1 * self.m[key] + (1.0 - beta1) * grad
            self.v[key] = beta2 * self.v[key] + (1.0 - beta2) * grad**2
            m_hat = self.m[key] / (1.0 - beta1**self.t)
            v_hat = self.v[key] / (1.0 - beta2**self.t)
            params[key] = params[key] - lr * m_hat / (np.sqrt(v_hat) + eps)
        return params


def train_mlp(
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    hidden: int,
    seed: int,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    max_epochs: int = 100,
    patience: int = 10,
    batch_size: int = 256,
) -> tuple[dict[str, np.ndarray], TrainHistory]:
    """Minibatch Adam training with early stopping on validation MSE.

    Stops once validation MSE has not improved for ``patience`` epochs and
    restores the weights of the best epoch. Deterministic for a fixed seed:
    initialization and shuffling come from one derived stream.
    """
    params = init_params(x_train.shape[1], hidden, y_train.shape[1], seed)
    state = AdamState(params)
    rng = derive_stream(seed, "mlp-shuffle")
    n = x_train.shape[0]
    best_params = {k: v.copy() for k, v in params.items()}
    best_val = np.inf
    best_epoch = -1
    history = TrainHistory(train_mse=[], val_mse=[], best_epoch=-1)
    for epoch in range(max_epochs):
        order = permutation(rng, n)
        for lo in range(0, n, batch_size):
            batch = order[lo : lo + batch_size]
            _, grads = loss_and_grad(params, x_train[batch], y_train[batch])
            params = state.update(params, grads, lr, beta1, beta2, eps)
        train_mse = float(np.mean((forward(params, x_train) - y_train) ** 2))
        val_mse = float(np.mean((forward(params, x_val) - y_val) ** 2))
        history.train_mse.append(train_mse)
        history.val_mse.append(val_mse)
        if val_mse < best_val:
            best_val = val_mse
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in params.items()}
        elif epoch - best_epoch >= patience:
            break
    history.best_epoch = best_epoch
    return best_params, history
