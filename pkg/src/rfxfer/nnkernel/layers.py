"""Layer primitives. Each layer owns its parameters and returns
(output, cache) from forward; backward maps (cache, upstream grad) to
(input grad, parameter grads)."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def dropout(activations, rate, rng, training):
    """Inverted dropout: zero with probability rate, scale survivors by
    1/(1-rate). Identity in eval mode or at rate 0."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return activations, None
    if rng is None:
        raise ValueError("training-mode dropout needs a generator")
    keep = rng.random(activations.shape) >= rate
    mask = keep.astype(activations.dtype) / (1.0 - rate)
    return activations * mask, mask


class Conv2D:
    """Valid (unpadded) 2-D convolution via an im2col matrix product."""

    has_params = True

    def __init__(self, weight, bias):
        self.weight = weight  # (out_c, in_c, kh, kw)
        self.bias = bias  # (out_c,)

    @property
    def params(self):
        return [self.weight, self.bias]

    def forward(self, x, training, rng):
        out_c, in_c, kh, kw = self.weight.shape
        b, c, h, w = x.shape
        if c != in_c:
            raise ValueError(f"conv expects {in_c} input channels, got {c}")
        if h < kh or w < kw:
            raise ValueError(f"input {h}x{w} smaller than kernel {kh}x{kw}")
        windows = sliding_window_view(x, (kh, kw), axis=(2, 3))  # (b,c,ho,wo,kh,kw)
        ho, wo = windows.shape[2], windows.shape[3]
        cols = np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5)).reshape(
            b * ho * wo, in_c * kh * kw
        )
        w_mat = self.weight.reshape(out_c, -1)
        y = cols @ w_mat.T + self.bias
        out = y.reshape(b, ho, wo, out_c).transpose(0, 3, 1, 2)
        return out, (x.shape, cols)

    def backward(self, cache, dy):
        x_shape, cols = cache
        out_c, in_c, kh, kw = self.weight.shape
        b, _, h, w = x_shape
        ho, wo = h - kh + 1, w - kw + 1
        dy_mat = np.ascontiguousarray(dy.transpose(0, 2, 3, 1)).reshape(-1, out_c)
        d_weight = (dy_mat.T @ cols).reshape(self.weight.shape)
        d_bias = dy_mat.sum(axis=0)
        dcols = dy_mat @ self.weight.reshape(out_c, -1)
        dcols = dcols.reshape(b, ho, wo, in_c, kh, kw)
        dx = np.zeros(x_shape, dtype=dy.dtype)
        for i in range(kh):
            for j in range(kw):
                dx[:, :, i : i + ho, j : j + wo] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return dx, [d_weight, d_bias]


class ReLU:
    has_params = False
    params = []

    def forward(self, x, training, rng):
        mask = x > 0
        return x * mask, mask

    def backward(self, cache, dy):
        return dy * cache, []


class Dropout:
    has_params = False
    params = []

    def __init__(self, rate):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x, training, rng):
        return dropout(x, self.rate, rng, training)

    def backward(self, cache, dy):
        if cache is None:  # eval mode or rate 0
            return dy, []
        return dy * cache, []


class Flatten:
    has_params = False
    params = []

    def forward(self, x, training, rng):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, cache, dy):
        return dy.reshape(cache), []


class Linear:
    has_params = True

    def __init__(self, weight, bias):
        self.weight = weight  # (in_features, out_features)
        self.bias = bias  # (out_features,)

    @property
    def params(self):
        return [self.weight, self.bias]

    def forward(self, x, training, rng):
        if x.ndim != 2 or x.shape[1] != self.weight.shape[0]:
            raise ValueError(
                f"linear expects (B, {self.weight.shape[0]}), got {x.shape}"
            )
        return x @ self.weight + self.bias, x

    def backward(self, cache, dy):
        d_weight = cache.T @ dy
        d_bias = dy.sum(axis=0)
        dx = dy @ self.weight.T
        return dx, [d_weight, d_bias]
