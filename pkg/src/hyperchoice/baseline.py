"""Global linear utility baseline: L2-regularized logistic regression.

One weight per feature for the whole population, estimated by full-batch
gradient descent with a backtracking step size. Serves as the comparator
for the personalized ensemble.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, FeatureSchema, NormStats
from .numerics import clamp_prob, sigmoid


@dataclass
class LinearModel:
    """Global weights and intercept of the systematic utility."""

    weights: np.ndarray  # (F,)
    bias: float
    schema: FeatureSchema
    norm_stats: NormStats

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias)):
            raise ValueError("linear model parameters must be finite")

    @property
    def schema_fingerprint(self) -> str:
        return self.schema.fingerprint()


def _loss_and_grad(w, b, X, y, l2):
    logits = X @ w + b
    p = clamp_prob(sigmoid(logits))
    loss = float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)) + l2 * (w @ w))
    d = (sigmoid(logits) - y) / X.shape[0]
    gw = X.T @ d + 2.0 * l2 * w
    gb = d.sum()
    return loss, gw, gb


def fit_logreg(train: Dataset, l2: float = 1e-4, max_iters: int = 2000,
               grad_tol: float = 1e-6) -> LinearModel:
    """Minimize mean BCE + l2 * ||w||^2 by gradient descent with backtracking.

    Runs until the gradient norm drops below ``grad_tol`` or ``max_iters``
    passes. Deterministic: starts from zero.
    """
    if l2 < 0:
        raise ValueError("l2 must be >= 0")
    y = train.y.astype(np.float64)
    if y.min() == y.max():
        raise ValueError("training data contains a single class")
    X = train.X
    w = np.zeros(train.n_features)
    b = 0.0
    step = 1.0
    loss, gw, gb = _loss_and_grad(w, b, X, y, l2)
    for _ in range(max_iters):
        gnorm2 = gw @ gw + gb * gb
        if np.sqrt(gnorm2) < grad_tol:
            break
        # Backtracking line search with Armijo condition.
        step = min(step * 2.0, 64.0)
        while True:
            w_new = w - step * gw
            b_new = b - step * gb
            loss_new, gw_new, gb_new = _loss_and_grad(w_new, b_new, X, y, l2)
            if loss_new <= loss - 1e-4 * step * gnorm2 or step < 1e-12:
                break
            step *= 0.5
        w, b, loss, gw, gb = w_new, b_new, loss_new, gw_new, gb_new
    return LinearModel(weights=w, bias=float(b), schema=train.schema,
                       norm_stats=train.norm_stats)


def predict_logreg_batch(model: LinearModel, X: np.ndarray) -> np.ndarray:
    """Clamped rejection probabilities for a batch of records."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return clamp_prob(sigmoid(X @ model.weights + model.bias))


def predict_logreg(model: LinearModel, x: np.ndarray) -> float:
    """Rejection probability for one record."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.weights.shape[0],):
        raise ValueError(f"expected record of length {model.weights.shape[0]}, got {x.shape}")
    return float(predict_logreg_batch(model, x[None, :])[0])
