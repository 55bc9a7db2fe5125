"""Bias-corrected Adam over a flat list of parameter arrays."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class OptimizerState:
    """Moment accumulators and hyperparameters for Adam."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            step=0,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_step(state: OptimizerState, weights, grads):
    """One in-place Adam update; returns (weights, state).

    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) with the usual
    1/(1-beta^t) bias corrections.
    """
    if len(weights) != len(state.m) or len(grads) != len(state.m):
        raise ValueError(
            f"parameter count mismatch: {len(weights)} weights, "
            f"{len(grads)} grads, state holds {len(state.m)}"
        )
    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1**t
    correction2 = 1.0 - state.beta2**t
    for w, g, m, v in zip(weights, grads, state.m, state.v):
        if w.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != weight shape {w.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        w -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return weights, state
