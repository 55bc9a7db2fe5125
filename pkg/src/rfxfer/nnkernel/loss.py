"""Mean cross-entropy with a numerically stable log-softmax."""

from __future__ import annotations

import numpy as np


def cross_entropy(logits, labels):
    """Return (loss, dLoss/dLogits).

    loss is the batch mean of -log softmax(logits)[label]; the gradient is
    (softmax - onehot) / B. Logits are max-shifted before exponentiation so
    arbitrarily large margins cannot overflow.
    """
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ValueError(f"logits must be (B, C), got {logits.shape}")
    b, c = logits.shape
    if labels.shape != (b,):
        raise ValueError(f"labels must be ({b},), got {labels.shape}")
    if labels.dtype.kind not in "iu":
        raise ValueError("labels must be integers")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"labels must lie in [0, {c})")

    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    denom = exp.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(denom)
    loss = float(-np.mean(log_probs[np.arange(b), labels]))

    grad = exp / denom
    grad[np.arange(b), labels] -= 1.0
    grad /= b
    return loss, grad.astype(logits.dtype, copy=False)
