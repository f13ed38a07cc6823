"""Hypernetwork mapping a record to its own linear utility (weights, bias).

The network consumes a standardized record x and emits F+1 numbers: the
personalized feature weights and an intercept. Rejection probability is
sigmoid(w(x) . x + b(x)). Training minimizes mean BCE plus an elastic
penalty on the generated weights (the intercept is never penalized).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import nn
from .data import Dataset
from .errors import NumericError
from .numerics import PROB_EPS, clamp_prob, sigmoid


@dataclass
class InstanceUtility:
    """Personalized linear utility for one record: one weight per feature."""

    weights: np.ndarray  # (F,)
    bias: float

    def logit(self, x: np.ndarray) -> float:
        return float(self.weights @ x + self.bias)


@dataclass
class HyperMemberParams:
    """One trained hypernetwork: its parameters, shape and schema identity."""

    net: nn.NetParams
    arch: nn.NetworkArch
    schema_fingerprint: str = ""

    def __post_init__(self):
        if self.arch.output_dim != self.arch.input_dim + 1:
            raise ValueError("hypernetwork must emit one weight per feature plus a bias")

    @property
    def n_features(self) -> int:
        return self.arch.input_dim


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings for one member.

    ``l1_ratio`` mixes the L1 and squared-L2 weight penalties and
    ``penalty_scale`` multiplies the whole penalty term.
    """

    l1_ratio: float = 0.5
    penalty_scale: float = 1e-3
    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 1e-3
    patience: int = 20
    validation_fraction: float = 0.1
    seed: int = 0
    embed_dim: int = 64
    n_residual_blocks: int = 2
    hidden_dim: int = 64
    dropout_rate: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.l1_ratio <= 1.0:
            raise ValueError("l1_ratio must be in [0, 1]")
        if self.penalty_scale < 0:
            raise ValueError("penalty_scale must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in (0, 1)")

    def arch_for(self, n_features: int) -> nn.NetworkArch:
        return nn.NetworkArch(
            input_dim=n_features, output_dim=n_features + 1,
            embed_dim=self.embed_dim, n_residual_blocks=self.n_residual_blocks,
            hidden_dim=self.hidden_dim, dropout_rate=self.dropout_rate,
        )


def generate_utilities(member: HyperMemberParams, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row generated weights (B, F) and intercepts (B,), eval mode."""
    out, _ = nn.forward(member.net, member.arch, np.atleast_2d(X), train_mode=False)
    return out[:, :-1], out[:, -1]


def hyper_forward(member: HyperMemberParams, x: np.ndarray) -> InstanceUtility:
    """Personalized utility for a single record."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (member.n_features,):
        raise ValueError(f"expected record of length {member.n_features}, got {x.shape}")
    W, b = generate_utilities(member, x[None, :])
    return InstanceUtility(weights=W[0], bias=float(b[0]))


def rejection_probs(member: HyperMemberParams, X: np.ndarray) -> np.ndarray:
    """Clamped rejection probabilities for a batch of records."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    W, b = generate_utilities(member, X)
    return clamp_prob(sigmoid(np.einsum("bf,bf->b", W, X) + b))


def predict_prob(member: HyperMemberParams, x: np.ndarray) -> float:
    """Probability that the record is rejected (label 1)."""
    return float(rejection_probs(member, np.asarray(x)[None, :])[0])


def penalty(u: InstanceUtility, l1_ratio: float, penalty_scale: float) -> float:
    """Elastic penalty on the generated weights; the intercept is exempt."""
    w = u.weights
    return float(penalty_scale * (l1_ratio * np.abs(w).sum()
                                  + (1.0 - l1_ratio) * (w * w).sum()))


def batch_loss(member: HyperMemberParams, batch: tuple[np.ndarray, np.ndarray],
               cfg: TrainConfig, train_mode: bool = False,
               dropout_seed: int = 0) -> tuple[float, nn.NetParams]:
    """Mean BCE + penalty over a batch, with exact parameter gradients.

    Gradients flow through both the probability path (the weights multiply
    the input in the logit) and the penalty path. The L1 subgradient at 0
    is taken as 0.
    """
    X, y = batch
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = X.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    if y.shape[0] != n:
        raise ValueError("labels do not match batch size")

    out, cache = nn.forward(member.net, member.arch, X,
                            train_mode=train_mode, dropout_seed=dropout_seed)
    W = out[:, :-1]
    b = out[:, -1]
    logits = np.einsum("bf,bf->b", W, X) + b
    p_raw = sigmoid(logits)
    p = clamp_prob(p_raw)
    bce = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))

    scale, mix = cfg.penalty_scale, cfg.l1_ratio
    pen = scale * (mix * np.abs(W).sum(axis=1) + (1.0 - mix) * (W * W).sum(axis=1))
    loss = float(np.mean(bce + pen))
    if not math.isfinite(loss):
        raise NumericError(f"non-finite loss on batch of {n} rows")

    # d(mean BCE)/d logit is (p - y)/n wherever the clamp is inactive, else 0.
    inside = (p_raw > PROB_EPS) & (p_raw < 1.0 - PROB_EPS)
    dlogit = np.where(inside, p_raw - y, 0.0) / n
    grad_out = np.empty_like(out)
    grad_out[:, :-1] = dlogit[:, None] * X + (scale / n) * (
        mix * np.sign(W) + 2.0 * (1.0 - mix) * W)
    grad_out[:, -1] = dlogit
    grads = nn.backward(member.net, member.arch, cache, grad_out)
    return loss, grads


@dataclass
class EpochStats:
    """Per-epoch training record passed to the optional callback."""

    epoch: int
    n_batches: int
    train_loss: float
    val_nll: float
    improved: bool


def _validation_nll(member: HyperMemberParams, X: np.ndarray, y: np.ndarray) -> float:
    p = rejection_probs(member, X)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def train_member(train: Dataset, cfg: TrainConfig, seed: int | None = None,
                 callback=None) -> HyperMemberParams:
    """Train one hypernetwork member with Adam and early stopping.

    A validation slice is held out from ``train``; the parameters with the
    best validation NLL are returned. ``callback(EpochStats)`` is invoked
    after each epoch when given. Fully deterministic for a fixed
    (data, cfg, seed).
    """
    if seed is None:
        seed = cfg.seed
    y_all = train.y
    if y_all.min() == y_all.max():
        raise ValueError("training data contains a single class; BCE is degenerate")

    rng = np.random.default_rng(seed)
    n = train.n_rows
    n_val = min(max(int(round(n * cfg.validation_fraction)), 1), n - 1)
    perm = rng.permutation(n)
    val_idx, fit_idx = perm[:n_val], perm[n_val:]
    X_fit, y_fit = train.X[fit_idx], y_all[fit_idx]
    X_val, y_val = train.X[val_idx], y_all[val_idx].astype(np.float64)

    arch = cfg.arch_for(train.n_features)
    member = HyperMemberParams(net=nn.init_params(arch, seed), arch=arch,
                               schema_fingerprint=train.schema.fingerprint())
    opt = nn.init_opt_state(member.net, learning_rate=cfg.learning_rate)

    n_fit = X_fit.shape[0]
    n_batches = math.ceil(n_fit / cfg.batch_size)
    best_nll = np.inf
    best_net = member.net.copy()
    epochs_since_improve = 0

    for epoch in range(cfg.epochs):
        order = rng.permutation(n_fit)
        epoch_loss = 0.0
        for bi in range(n_batches):
            rows = order[bi * cfg.batch_size:(bi + 1) * cfg.batch_size]
            dropout_seed = int(rng.integers(0, 2**63 - 1))
            loss, grads = batch_loss(member, (X_fit[rows], y_fit[rows]), cfg,
                                     train_mode=True, dropout_seed=dropout_seed)
            member.net, opt = nn.adam_step(opt, member.net, grads)
            epoch_loss += loss * len(rows)
        epoch_loss /= n_fit

        val_nll = _validation_nll(member, X_val, y_val)
        improved = val_nll < best_nll
        if improved:
            best_nll = val_nll
            best_net = member.net.copy()
            epochs_since_improve = 0
        else:
            epochs_since_improve += 1
        if callback is not None:
            callback(EpochStats(epoch=epoch, n_batches=n_batches,
                                train_loss=epoch_loss, val_nll=val_nll,
                                improved=improved))
        if epochs_since_improve >= cfg.patience:
            break

    return replace(member, net=best_net)
