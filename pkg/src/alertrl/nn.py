"""Small MLP with hand-derived gradients and an Adam optimizer.

Architecture: dense layers with rectifier activations on the hidden layers and
an identity output head (the outputs are Q-values, one per action).  All
arithmetic is float64; the network is tiny, so gradient-check fidelity beats
speed.  Parameters are immutable values: every operation returns new arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MlpParams:
    """Dense-layer weights and biases; weights[i] has shape (fan_in, fan_out)."""

    weights: tuple
    biases: tuple

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def num_layers(self) -> int:
        return len(self.weights)


def init_params(layer_sizes, seed: int) -> MlpParams:
    """Scaled-uniform init: |w| <= sqrt(6 / (fan_in + fan_out)), biases zero."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(tuple(weights), tuple(biases))


def forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Q-values for a single input vector or a batch (rows are samples)."""
    a = np.asarray(x, dtype=np.float64)
    single = a.ndim == 1
    if single:
        a = a[None, :]
    if a.shape[1] != params.weights[0].shape[0]:
        raise ValueError(
            f"input width {a.shape[1]} != network input size {params.weights[0].shape[0]}"
        )
    last = params.num_layers - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = a @ w + b
        if i < last:
            np.maximum(a, 0.0, out=a)
    return a[0] if single else a


def _forward_cached(params: MlpParams, x: np.ndarray):
    activations = [x]
    last = params.num_layers - 1
    a = x
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = a @ w + b
        if i < last:
            a = np.maximum(a, 0.0)
        activations.append(a)
    return activations


def mse_grad(params: MlpParams, inputs, targets, actions):
    """Loss and gradient of the masked MSE regression.

    Each sample contributes ``(q[action] - target)^2``; only the selected
    output unit receives error signal.  Returns ``(grads, loss)`` with grads
    shaped like ``params``.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    t = np.asarray(targets, dtype=np.float64).ravel()
    a_idx = np.asarray(actions, dtype=np.int64).ravel()
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    if not (len(t) == len(a_idx) == n):
        raise ValueError("batch size mismatch between inputs, targets and actions")

    acts = _forward_cached(params, x)
    q = acts[-1]
    err = q[np.arange(n), a_idx] - t
    loss = float(np.mean(err**2))

    delta = np.zeros_like(q)
    delta[np.arange(n), a_idx] = 2.0 * err / n
    g_w, g_b = [], []
    for i in range(params.num_layers - 1, -1, -1):
        g_w.append(acts[i].T @ delta)
        g_b.append(delta.sum(axis=0))
        if i > 0:
            delta = (delta @ params.weights[i].T) * (acts[i] > 0.0)
    grads = MlpParams(tuple(reversed(g_w)), tuple(reversed(g_b)))
    return grads, loss


@dataclass(frozen=True)
class AdamState:
    """First/second moment accumulators plus step count and hyperparameters."""

    m_weights: tuple
    m_biases: tuple
    v_weights: tuple
    v_biases: tuple
    t: int
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: MlpParams, lr: float = 1e-4) -> AdamState:
    zeros_w = tuple(np.zeros_like(w) for w in params.weights)
    zeros_b = tuple(np.zeros_like(b) for b in params.biases)
    return AdamState(zeros_w, zeros_b, tuple(np.zeros_like(w) for w in params.weights),
                     tuple(np.zeros_like(b) for b in params.biases), t=0, lr=lr)


def adam_step(params: MlpParams, grads: MlpParams, state: AdamState):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    for g in (*grads.weights, *grads.biases):
        if not np.isfinite(g).all():
            raise FloatingPointError("non-finite gradient passed to adam_step")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t

    def update(p, g, m, v):
        m_new = b1 * m + (1.0 - b1) * g
        v_new = b2 * v + (1.0 - b2) * g * g
        p_new = p - state.lr * (m_new / c1) / (np.sqrt(v_new / c2) + state.eps)
        return p_new, m_new, v_new

    new_w, m_w, v_w = [], [], []
    for p, g, m, v in zip(params.weights, grads.weights, state.m_weights, state.v_weights):
        pn, mn, vn = update(p, g, m, v)
        new_w.append(pn)
        m_w.append(mn)
        v_w.append(vn)
    new_b, m_b, v_b = [], [], []
    for p, g, m, v in zip(params.biases, grads.biases, state.m_biases, state.v_biases):
        pn, mn, vn = update(p, g, m, v)
        new_b.append(pn)
        m_b.append(mn)
        v_b.append(vn)
    new_params = MlpParams(tuple(new_w), tuple(new_b))
    new_state = AdamState(
        tuple(m_w), tuple(m_b), tuple(v_w), tuple(v_b), t=t,
        lr=state.lr, beta1=state.beta1, beta2=state.beta2, eps=state.eps,
    )
    return new_params, new_state


CHECKPOINT_VERSION = 1


def save_checkpoint(path, params: MlpParams, adam_state: AdamState | None = None,
                    seed: int | None = None) -> None:
    """Serialize params (and optionally optimizer state / seed lineage) to .npz."""
    payload = {
        "version": np.int64(CHECKPOINT_VERSION),
        "layer_sizes": np.asarray(params.layer_sizes, dtype=np.int64),
        "num_layers": np.int64(params.num_layers),
    }
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        payload[f"w{i}"] = w
        payload[f"b{i}"] = b
    if adam_state is not None:
        payload["adam_t"] = np.int64(adam_state.t)
        payload["adam_hyper"] = np.array(
            [adam_state.lr, adam_state.beta1, adam_state.beta2, adam_state.eps]
        )
        for i in range(params.num_layers):
            payload[f"mw{i}"] = adam_state.m_weights[i]
            payload[f"mb{i}"] = adam_state.m_biases[i]
            payload[f"vw{i}"] = adam_state.v_weights[i]
            payload[f"vb{i}"] = adam_state.v_biases[i]
    if seed is not None:
        payload["seed"] = np.int64(seed)
    np.savez(path, **payload)


def load_checkpoint(path):
    """Load a checkpoint; returns (params, adam_state_or_None, seed_or_None)."""
    with np.load(path) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        n = int(data["num_layers"])
        params = MlpParams(
            tuple(data[f"w{i}"] for i in range(n)),
            tuple(data[f"b{i}"] for i in range(n)),
        )
        adam_state = None
        if "adam_t" in data:
            lr, b1, b2, eps = data["adam_hyper"]
            adam_state = AdamState(
                tuple(data[f"mw{i}"] for i in range(n)),
                tuple(data[f"mb{i}"] for i in range(n)),
                tuple(data[f"vw{i}"] for i in range(n)),
                tuple(data[f"vb{i}"] for i in range(n)),
                t=int(data["adam_t"]), lr=float(lr), beta1=float(b1),
                beta2=float(b2), eps=float(eps),
            )
        seed = int(data["seed"]) if "seed" in data else None
    return params, adam_state, seed
