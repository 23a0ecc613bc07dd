"""Dense feed-forward Q-network: forward pass, TD backprop, Adam, target blending.

All arithmetic is float64. Parameters live in small dataclasses of plain
NumPy arrays; operations return new values instead of mutating their inputs,
so snapshots are always safe to share. The batched forward/backward work is
routed through :mod:`nrsched.backend`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from nrsched import backend

PARAMS_FORMAT_VERSION = 1

# Standard published Adam defaults.
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class MlpParams:
    """Weights and biases of a fully connected relu network.

    weights[k] has shape (layer_dims[k+1], layer_dims[k]) and biases[k] has
    length layer_dims[k+1]. Hidden layers apply relu; the output layer is
    linear.
    """

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> MlpParams:
        return MlpParams(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )


@dataclass
class Gradients:
    """Per-layer weight and bias gradients, shaped like an MlpParams."""

    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]

    def tensors(self):
        return self.d_weights + self.d_biases


@dataclass
class AdamState:
    """Adam first/second-moment accumulators plus the step counter."""

    m_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_weights: list[np.ndarray]
    v_biases: list[np.ndarray]
    step: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def zeros_like(cls, params: MlpParams) -> AdamState:
        return cls(
            m_weights=[np.zeros_like(w) for w in params.weights],
            m_biases=[np.zeros_like(b) for b in params.biases],
            v_weights=[np.zeros_like(w) for w in params.weights],
            v_biases=[np.zeros_like(b) for b in params.biases],
        )


def init_params(layer_dims: list[int], seed: int) -> MlpParams:
    """He-initialised network: W ~ N(0, 2/fan_in), zero biases.

    Deterministic for a fixed seed.
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise ValueError(f"need at least an input and an output layer, got dims {dims}")
    if any(d < 1 for d in dims):
        raise ValueError(f"layer dims must be positive, got {dims}")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        scale = np.sqrt(2.0 / fan_in)
        weights.append(rng.normal(0.0, scale, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(dims, weights, biases)


def forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Q-values for one input vector (length layer_dims[0])."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.layer_dims[0],):
        raise ValueError(
            f"input shape {x.shape} does not match input layer ({params.layer_dims[0]},)"
        )
    return backend.forward_one(params.weights, params.biases, x)


def forward_batch(params: MlpParams, xs: np.ndarray) -> np.ndarray:
    """Q-values for a batch of inputs, one row per sample."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != params.layer_dims[0]:
        raise ValueError(
            f"batch shape {xs.shape} does not match input layer ({params.layer_dims[0]},)"
        )
    return backend.batch_forward(params.weights, params.biases, xs)


def td_gradients(
    params: MlpParams, state: np.ndarray, action: int, target: float
) -> tuple[float, Gradients]:
    """Squared TD error (Q(s,a) - target)^2 and its gradients.

    Only the selected output unit contributes to the error signal.
    """
    n_actions = params.layer_dims[-1]
    if not 0 <= action < n_actions:
        raise IndexError(f"action {action} out of range [0, {n_actions})")
    state = np.asarray(state, dtype=np.float64).reshape(1, -1)
    if state.shape[1] != params.layer_dims[0]:
        raise ValueError(
            f"state length {state.shape[1]} does not match input layer {params.layer_dims[0]}"
        )
    loss, gw, gb = backend.td_backward_batch(
        params.weights,
        params.biases,
        state,
        np.array([action], dtype=np.intp),
        np.array([float(target)]),
    )
    return loss, Gradients(gw, gb)


def grad_norm(grads: Gradients) -> float:
    """Global L2 norm across every gradient tensor."""
    total = 0.0
    for g in grads.tensors():
        total += float(np.sum(g * g))
    return float(np.sqrt(total))


def clip_gradients(grads: Gradients, threshold: float) -> Gradients:
    """Rescale all gradients by threshold/norm when the global L2 norm exceeds it."""
    if threshold <= 0:
        raise ValueError(f"clip threshold must be positive, got {threshold}")
    norm = grad_norm(grads)
    if norm <= threshold:
        return grads
    scale = threshold / norm
    return Gradients(
        [g * scale for g in grads.d_weights],
        [g * scale for g in grads.d_biases],
    )


def adam_step(
    params: MlpParams, grads: Gradients, opt: AdamState, lr: float
) -> tuple[MlpParams, AdamState]:
    """One bias-corrected Adam update. Refuses NaN gradients."""
    for g in grads.tensors():
        if np.isnan(g).any():
            raise FloatingPointError("NaN gradient, update refused")
    t = opt.step + 1
    bc1 = 1.0 - opt.beta1**t
    bc2 = 1.0 - opt.beta2**t

    new_w, new_b = [], []
    m_w, m_b, v_w, v_b = [], [], [], []
    for p, g, m, v, out_p, out_m, out_v in (
        (params.weights, grads.d_weights, opt.m_weights, opt.v_weights, new_w, m_w, v_w),
        (params.biases, grads.d_biases, opt.m_biases, opt.v_biases, new_b, m_b, v_b),
    ):
        for pk, gk, mk, vk in zip(p, g, m, v):
            mk = opt.beta1 * mk + (1.0 - opt.beta1) * gk
            vk = opt.beta2 * vk + (1.0 - opt.beta2) * gk * gk
            step = lr * (mk / bc1) / (np.sqrt(vk / bc2) + opt.eps)
            out_p.append(pk - step)
            out_m.append(mk)
            out_v.append(vk)

    new_params = MlpParams(list(params.layer_dims), new_w, new_b)
    new_opt = AdamState(m_w, m_b, v_w, v_b, t, opt.beta1, opt.beta2, opt.eps)
    return new_params, new_opt


def soft_update(online: MlpParams, target: MlpParams, beta: float) -> MlpParams:
    """Blend target parameters toward the online ones: beta*online + (1-beta)*target."""
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must be in (0, 1], got {beta}")
    if online.layer_dims != target.layer_dims:
        raise ValueError(
            f"layer dims differ: {online.layer_dims} vs {target.layer_dims}"
        )
    return MlpParams(
        list(online.layer_dims),
        [beta * w + (1.0 - beta) * tw for w, tw in zip(online.weights, target.weights)],
        [beta * b + (1.0 - beta) * tb for b, tb in zip(online.biases, target.biases)],
    )


def params_to_dict(params: MlpParams) -> dict:
    """JSON-ready dict: layer dims plus row-major parameter arrays."""
    return {
        "format_version": PARAMS_FORMAT_VERSION,
        "layer_dims": list(params.layer_dims),
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }


def params_from_dict(doc: dict) -> MlpParams:
    if doc.get("format_version") != PARAMS_FORMAT_VERSION:
        raise ValueError(f"unsupported params format version: {doc.get('format_version')!r}")
    dims = [int(d) for d in doc["layer_dims"]]
    weights = [np.asarray(w, dtype=np.float64) for w in doc["weights"]]
    biases = [np.asarray(b, dtype=np.float64) for b in doc["biases"]]
    params = MlpParams(dims, weights, biases)
    for k, w in enumerate(weights):
        if w.shape != (dims[k + 1], dims[k]) or biases[k].shape != (dims[k + 1],):
            raise ValueError(f"layer {k} arrays do not match dims {dims}")
    return params


def save_params(params: MlpParams, path) -> None:
    """Write the portable text format (lossless float round-trip)."""
    with open(path, "w") as fh:
        json.dump(params_to_dict(params), fh)


def load_params(path) -> MlpParams:
    with open(path) as fh:
        return params_from_dict(json.load(fh))
