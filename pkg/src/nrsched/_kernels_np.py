"""NumPy implementation of the dense-network hot kernels.

Fallback for when the compiled extension is unavailable (or when forced via
NRSCHED_BACKEND=numpy). Same contract as ``nrsched._kernels``.
"""

import numpy as np


def forward_one(weights, biases, x):
    """Q-values for a single input vector: relu hidden layers, linear output."""
    h = x
    for w, b in zip(weights[:-1], biases[:-1]):
        h = np.maximum(w @ h + b, 0.0)
    return weights[-1] @ h + biases[-1]


def batch_forward(weights, biases, xs):
    """Q-values for a batch of inputs, one row per sample."""
    h = xs
    for w, b in zip(weights[:-1], biases[:-1]):
        h = np.maximum(h @ w.T + b, 0.0)
    return h @ weights[-1].T + biases[-1]


def td_backward_batch(weights, biases, states, actions, targets):
    """Mean squared TD error over a minibatch and its parameter gradients.

    loss = mean_i (Q(s_i)[a_i] - t_i)^2. Only the selected output unit of
    each sample carries an error signal; gradients are already reduced
    (mean over the batch).

    Returns (loss, weight_grads, bias_grads) with grads shaped like the
    parameters.
    """
    n_layers = len(weights)
    acts = [states]
    h = states
    for w, b in zip(weights[:-1], biases[:-1]):
        h = np.maximum(h @ w.T + b, 0.0)
        acts.append(h)
    q = h @ weights[-1].T + biases[-1]

    m = states.shape[0]
    rows = np.arange(m)
    err = q[rows, actions] - targets
    loss = float(np.mean(err * err))

    delta = np.zeros_like(q)
    delta[rows, actions] = 2.0 * err / m

    grad_w = [None] * n_layers
    grad_b = [None] * n_layers
    for k in range(n_layers - 1, -1, -1):
        grad_w[k] = delta.T @ acts[k]
        grad_b[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ weights[k]) * (acts[k] > 0.0)
    return loss, grad_w, grad_b
