"""Dense residual network with hand-derived gradients and an Adam optimizer.

Everything is float64 and seeded, so forward/backward/update sequences are
bit-reproducible. Layer order is: embedding linear, then two linears per
residual block, then the output head.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NumericError


@dataclass(frozen=True)
class NetworkArch:
    """Shape of the residual backbone. Activation is fixed to ReLU."""

    input_dim: int
    output_dim: int
    embed_dim: int = 64
    n_residual_blocks: int = 2
    hidden_dim: int = 64
    dropout_rate: float = 0.1

    def __post_init__(self):
        for name in ("input_dim", "output_dim", "embed_dim", "hidden_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_residual_blocks < 0:
            raise ValueError("n_residual_blocks must be >= 0")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")

    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) per linear layer, in forward order."""
        dims = [(self.input_dim, self.embed_dim)]
        for _ in range(self.n_residual_blocks):
            dims.append((self.embed_dim, self.hidden_dim))
            dims.append((self.hidden_dim, self.embed_dim))
        dims.append((self.embed_dim, self.output_dim))
        return dims


@dataclass
class NetParams:
    """Weight matrices and bias vectors, one pair per linear layer."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "NetParams":
        return NetParams([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        """All parameter arrays in a fixed order (weights then biases per layer)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())


def init_params(arch: NetworkArch, seed: int) -> NetParams:
    """Uniform(-s, s) weights with s = sqrt(6 / (fan_in + fan_out)); zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in arch.layer_dims():
        s = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-s, s, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetParams(weights, biases)


def zero_like(params: NetParams) -> NetParams:
    return NetParams([np.zeros_like(w) for w in params.weights],
                     [np.zeros_like(b) for b in params.biases])


def _dropout_mask(rng, shape, rate):
    # Inverted dropout: scaling here keeps eval-mode forward scale-free.
    return (rng.random(shape) >= rate) / (1.0 - rate)


def forward(params: NetParams, arch: NetworkArch, X: np.ndarray,
            train_mode: bool = False, dropout_seed: int = 0):
    """Run the network on a batch; returns (output, cache for backward).

    Dropout is applied between the two linears of each block, only in train
    mode, with a mask drawn deterministically from ``dropout_seed``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != arch.input_dim:
        raise ValueError(f"expected input of width {arch.input_dim}, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("input contains non-finite values")

    W, b = params.weights, params.biases
    rng = np.random.default_rng(dropout_seed)
    use_dropout = train_mode and arch.dropout_rate > 0.0

    z = X @ W[0] + b[0]
    cache = {"X": X, "block_in": [], "pre_act": [], "dropped": [], "masks": []}
    for k in range(arch.n_residual_blocks):
        i1, i2 = 1 + 2 * k, 2 + 2 * k
        u = z @ W[i1] + b[i1]
        r = np.maximum(u, 0.0)
        if use_dropout:
            mask = _dropout_mask(rng, r.shape, arch.dropout_rate)
            d = r * mask
        else:
            mask = None
            d = r
        cache["block_in"].append(z)
        cache["pre_act"].append(u)
        cache["dropped"].append(d)
        cache["masks"].append(mask)
        z = z + d @ W[i2] + b[i2]
    cache["trunk_out"] = z
    out = z @ W[-1] + b[-1]
    return out, cache


def backward(params: NetParams, arch: NetworkArch, cache: dict,
             grad_output: np.ndarray) -> NetParams:
    """Exact gradients of sum(output * grad_output) w.r.t. every parameter."""
    grad_output = np.asarray(grad_output, dtype=np.float64)
    z = cache["trunk_out"]
    if grad_output.shape != (z.shape[0], params.biases[-1].shape[0]):
        raise ValueError(f"grad_output shape {grad_output.shape} does not match output")

    W = params.weights
    grads = zero_like(params)
    grads.weights[-1] = z.T @ grad_output
    grads.biases[-1] = grad_output.sum(axis=0)
    dz = grad_output @ W[-1].T

    for k in range(arch.n_residual_blocks - 1, -1, -1):
        i1, i2 = 1 + 2 * k, 2 + 2 * k
        d = cache["dropped"][k]
        grads.weights[i2] = d.T @ dz
        grads.biases[i2] = dz.sum(axis=0)
        dd = dz @ W[i2].T
        mask = cache["masks"][k]
        dr = dd if mask is None else dd * mask
        du = dr * (cache["pre_act"][k] > 0.0)
        z_in = cache["block_in"][k]
        grads.weights[i1] = z_in.T @ du
        grads.biases[i1] = du.sum(axis=0)
        dz = dz + du @ W[i1].T  # skip connection

    X = cache["X"]
    grads.weights[0] = X.T @ dz
    grads.biases[0] = dz.sum(axis=0)
    return grads


@dataclass
class OptState:
    """Adam accumulators plus hyperparameters."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_opt_state(params: NetParams, learning_rate: float = 1e-3,
                   beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8) -> OptState:
    arrays = params.arrays()
    return OptState(m=[np.zeros_like(a) for a in arrays],
                    v=[np.zeros_like(a) for a in arrays],
                    learning_rate=learning_rate, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(state: OptState, params: NetParams, grads: NetParams) -> tuple[NetParams, OptState]:
    """One bias-corrected Adam update; inputs are not mutated."""
    g_arrays = grads.arrays()
    for g in g_arrays:
        if not np.isfinite(g).all():
            raise NumericError("non-finite gradient; training aborted")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    new_m, new_v, new_arrays = [], [], []
    for a, g, m, v in zip(params.arrays(), g_arrays, state.m, state.v):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_arrays.append(a - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    n_layers = len(params.weights)
    new_params = NetParams(weights=[new_arrays[2 * i] for i in range(n_layers)],
                           biases=[new_arrays[2 * i + 1] for i in range(n_layers)])
    new_state = replace(state, m=new_m, v=new_v, step=t)
    return new_params, new_state


def grad_check(loss_fn, params: NetParams, h: float = 1e-5,
               n_coords: int = 200, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn(params) -> (loss, grads)`` must be deterministic (dropout off).
    A random subsample of coordinates is probed; relative error is
    |a - fd| / (|a| + |fd| + 1e-12).
    """
    if h <= 0:
        raise ValueError("h must be positive")
    _, analytic = loss_fn(params)
    a_arrays = analytic.arrays()
    sizes = [a.size for a in a_arrays]
    total = sum(sizes)
    rng = np.random.default_rng(seed)
    n = min(n_coords, total)
    flat_idx = rng.choice(total, size=n, replace=False)

    offsets = np.cumsum([0] + sizes)
    max_rel = 0.0
    work = params.copy()
    w_arrays = work.arrays()
    for fi in flat_idx:
        ai = int(np.searchsorted(offsets, fi, side="right") - 1)
        local = int(fi - offsets[ai])
        arr = w_arrays[ai].reshape(-1)
        orig = arr[local]
        arr[local] = orig + h
        plus, _ = loss_fn(work)
        arr[local] = orig - h
        minus, _ = loss_fn(work)
        arr[local] = orig
        fd = (plus - minus) / (2.0 * h)
        a = a_arrays[ai].reshape(-1)[local]
        rel = abs(a - fd) / (abs(a) + abs(fd) + 1e-12)
        max_rel = max(max_rel, rel)
    return max_rel
