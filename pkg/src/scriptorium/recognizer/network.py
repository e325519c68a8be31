"""Bidirectional recurrent network with gated long/short-term memory.

Plain numpy, float64 throughout.  One frame per input column; the two
directions are concatenated and projected onto the class scores.  The
input projections for all frames are batched into single matrix
products so the sequential loop only carries the recurrent term.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit as sigmoid


def _glorot(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    limit = np.sqrt(6.0 / sum(shape))
    return rng.uniform(-limit, limit, size=shape)


def init_params(
    input_size: int, hidden_size: int, n_classes: int, seed: int = 0
) -> dict[str, np.ndarray]:
    """Fresh parameter set; forget gates start open (bias +1)."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    H = hidden_size
    for d in ("fw", "bw"):
        params[f"W_{d}"] = _glorot(rng, (input_size, 4 * H))
        params[f"U_{d}"] = _glorot(rng, (H, 4 * H))
        b = np.zeros(4 * H)
        b[H : 2 * H] = 1.0
        params[f"b_{d}"] = b
    params["W_out"] = _glorot(rng, (2 * H, n_classes))
    params["b_out"] = np.zeros(n_classes)
    return params


def _direction_forward(x, W, U, b, H):
    T = x.shape[0]
    xp = x @ W + b  # T x 4H, batched input projection
    gates = np.empty((T, 4 * H))
    cells = np.empty((T, H))
    hidden = np.empty((T, H))
    h = np.zeros(H)
    c = np.zeros(H)
    for t in range(T):
        pre = xp[t] + h @ U
        i = sigmoid(pre[:H])
        f = sigmoid(pre[H : 2 * H])
        g = np.tanh(pre[2 * H : 3 * H])
        o = sigmoid(pre[3 * H :])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[t, :H] = i
        gates[t, H : 2 * H] = f
        gates[t, 2 * H : 3 * H] = g
        gates[t, 3 * H :] = o
        cells[t] = c
        hidden[t] = h
    return {"x": x, "gates": gates, "cells": cells, "hidden": hidden}


def _direction_backward(cache, dh_out, U, H):
    """BPTT for one direction; returns (dW, dU, db) given dL/dh."""
    x, gates, cells, hidden = cache["x"], cache["gates"], cache["cells"], cache["hidden"]
    T = x.shape[0]
    dpre_all = np.empty((T, 4 * H))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in range(T - 1, -1, -1):
        i = gates[t, :H]
        f = gates[t, H : 2 * H]
        g = gates[t, 2 * H : 3 * H]
        o = gates[t, 3 * H :]
        c = cells[t]
        c_prev = cells[t - 1] if t > 0 else np.zeros(H)
        tc = np.tanh(c)
        dh = dh_out[t] + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dc_next = dc * f
        dpre = dpre_all[t]
        dpre[:H] = di * i * (1.0 - i)
        dpre[H : 2 * H] = df * f * (1.0 - f)
        dpre[2 * H : 3 * H] = dg * (1.0 - g * g)
        dpre[3 * H :] = do * o * (1.0 - o)
        dh_next = dpre @ U.T
    h_prev = np.vstack([np.zeros(H), hidden[:-1]])
    dW = x.T @ dpre_all
    dU = h_prev.T @ dpre_all
    db = dpre_all.sum(axis=0)
    return dW, dU, db


def forward(params: dict, x: np.ndarray, want_cache: bool = False):
    """Class scores (T x n_classes) for an input of T frames."""
    x = np.asarray(x, dtype=np.float64)
    H = params["U_fw"].shape[0]
    cache_fw = _direction_forward(x, params["W_fw"], params["U_fw"], params["b_fw"], H)
    cache_bw = _direction_forward(
        x[::-1], params["W_bw"], params["U_bw"], params["b_bw"], H
    )
    h2 = np.concatenate([cache_fw["hidden"], cache_bw["hidden"][::-1]], axis=1)
    logits = h2 @ params["W_out"] + params["b_out"]
    if not want_cache:
        return logits
    return logits, {"fw": cache_fw, "bw": cache_bw, "h2": h2}


def backward(params: dict, cache: dict, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients for every parameter given dL/dlogits."""
    H = params["U_fw"].shape[0]
    h2 = cache["h2"]
    grads = {
        "W_out": h2.T @ dlogits,
        "b_out": dlogits.sum(axis=0),
    }
    dh2 = dlogits @ params["W_out"].T
    dW, dU, db = _direction_backward(cache["fw"], dh2[:, :H], params["U_fw"], H)
    grads["W_fw"], grads["U_fw"], grads["b_fw"] = dW, dU, db
    dW, dU, db = _direction_backward(
        cache["bw"], dh2[::-1, H:], params["U_bw"], H
    )
    grads["W_bw"], grads["U_bw"], grads["b_bw"] = dW, dU, db
    return grads


class MomentumSgd:
    """Classic momentum update: v = mu*v - lr*g; w += v."""

    def __init__(self, lr: float, momentum: float):
        self.lr = lr
        self.momentum = momentum
        self.velocity: dict[str, np.ndarray] = {}

    def step(self, params: dict, grads: dict) -> None:
        for name, grad in grads.items():
            v = self.velocity.get(name)
            if v is None:
                v = np.zeros_like(grad)
            v = self.momentum * v - self.lr * grad
            self.velocity[name] = v
            params[name] += v
