"""Alignment-free sequence loss over frame-wise class scores.

Implements the blank-augmented forward-backward recursion entirely in
log space (line images can run to thousands of frames, so linear-space
products underflow).  Class index 0 is the blank.  ``ctc_loss`` returns
both the negative log-likelihood of the target labelling and its exact
gradient with respect to the pre-softmax scores.
"""

from __future__ import annotations

import numpy as np

NEG_INF = -np.inf


class InfeasibleAlignmentError(ValueError):
    """Target cannot be emitted within the available frames."""


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def min_frames(target: list[int] | np.ndarray) -> int:
    """Minimum frame count: one per symbol plus a blank between repeats."""
    target = list(target)
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats


def _extended(target: list[int]) -> np.ndarray:
    ext = np.zeros(2 * len(target) + 1, dtype=np.int64)
    ext[1::2] = target
    return ext


def ctc_loss(logits: np.ndarray, target) -> tuple[float, np.ndarray]:
    """Negative log-likelihood of ``target`` plus gradient w.r.t. logits.

    ``logits`` is T x (K+1) with column 0 the blank; ``target`` is a
    sequence of symbol indices in 1..K.  Raises
    InfeasibleAlignmentError when T is too short to emit the target.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ValueError("logits must be a T x (K+1) matrix")
    target = [int(t) for t in target]
    T, n_classes = logits.shape
    if any(t <= 0 or t >= n_classes for t in target):
        raise ValueError("target indices must lie in 1..K")
    if T < min_frames(target):
        raise InfeasibleAlignmentError(
            f"target needs at least {min_frames(target)} frames, got {T}"
        )

    lp = log_softmax(logits)
    ext = _extended(target)
    S = len(ext)
    emit = lp[:, ext]  # T x S

    # skip transition s-2 -> s allowed between distinct non-blank labels
    can_skip = np.zeros(S, dtype=bool)
    if S > 2:
        can_skip[2:] = (ext[2:] != 0) & (ext[2:] != ext[:-2])

    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = emit[0, 0]
    if S > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, T):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        if S > 2:
            skip = np.where(can_skip[2:], prev[:-2], NEG_INF)
            acc[2:] = np.logaddexp(acc[2:], skip)
        alpha[t] = acc + emit[t]

    beta = np.full((T, S), NEG_INF)
    beta[T - 1, S - 1] = emit[T - 1, S - 1]
    if S > 1:
        beta[T - 1, S - 2] = emit[T - 1, S - 2]
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        if S > 2:
            skip = np.where(can_skip[2:], nxt[2:], NEG_INF)
            acc[:-2] = np.logaddexp(acc[:-2], skip)
        beta[t] = acc + emit[t]

    if S > 1:
        log_z = np.logaddexp(alpha[T - 1, S - 1], alpha[T - 1, S - 2])
    else:
        log_z = alpha[T - 1, 0]
    loss = -float(log_z)

    # posterior mass per class: alpha and beta each include the emission
    # at t, so divide it out once before summing over states
    with np.errstate(invalid="ignore"):
        occupancy = alpha + beta - emit  # T x S, log domain
    log_gamma = np.full((T, n_classes), NEG_INF)
    for s in range(S):
        k = ext[s]
        log_gamma[:, k] = np.logaddexp(log_gamma[:, k], occupancy[:, s])
    grad = np.exp(lp) - np.exp(log_gamma - log_z)
    return loss, grad


def decode_greedy(logits: np.ndarray, inventory) -> str:
    """Best-path decoding: frame argmax, collapse repeats, drop blanks."""
    best = np.argmax(logits, axis=1)
    out = []
    prev = -1
    for k in best:
        if k != prev and k != 0:
            out.append(inventory.symbol(int(k)))
        prev = k
    return "".join(out)


def frame_confidence(logits: np.ndarray) -> float:
    """Mean max softmax over emitting frames (all frames when none emit)."""
    probs = np.exp(log_softmax(logits))
    best = np.argmax(logits, axis=1)
    peaks = probs[np.arange(len(best)), best]
    emitting = best != 0
    if emitting.any():
        return float(peaks[emitting].mean())
    return float(peaks.mean()) if len(peaks) else 0.0
