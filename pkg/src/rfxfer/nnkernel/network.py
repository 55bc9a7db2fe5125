"""Network assembly: layer specs, shape chaining, forward/backward, features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import Conv2D, Dropout, Flatten, Linear, ReLU

KINDS = ("conv2d", "relu", "dropout", "flatten", "linear")


@dataclass
class ForwardCache:
    """Training-mode forward artifacts needed by backward."""

    layer_caches: list
    logits: np.ndarray


@dataclass(frozen=True)
class LayerSpec:
    """Declarative description of one layer."""

    kind: str
    out_channels: int | None = None
    kernel: tuple | None = None
    out_features: int | None = None
    dropout_rate: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind == "conv2d":
            if not self.out_channels or not self.kernel or len(self.kernel) != 2:
                raise ValueError("conv2d needs out_channels and a 2-D kernel")
            object.__setattr__(self, "kernel", tuple(int(k) for k in self.kernel))
        if self.kind == "linear" and not self.out_features:
            raise ValueError("linear needs out_features")
        if self.kind == "dropout":
            rate = self.dropout_rate
            if rate is None or not 0.0 <= rate < 1.0:
                raise ValueError(f"dropout rate must be in [0, 1), got {rate}")

    @classmethod
    def conv2d(cls, out_channels, kernel):
        return cls(kind="conv2d", out_channels=int(out_channels), kernel=tuple(kernel))

    @classmethod
    def relu(cls):
        return cls(kind="relu")

    @classmethod
    def dropout(cls, rate=0.5):
        return cls(kind="dropout", dropout_rate=float(rate))

    @classmethod
    def flatten(cls):
        return cls(kind="flatten")

    @classmethod
    def linear(cls, out_features):
        return cls(kind="linear", out_features=int(out_features))

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.out_channels is not None:
            d["out_channels"] = self.out_channels
        if self.kernel is not None:
            d["kernel"] = list(self.kernel)
        if self.out_features is not None:
            d["out_features"] = self.out_features
        if self.dropout_rate is not None:
            d["dropout_rate"] = self.dropout_rate
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        kernel = d.get("kernel")
        return cls(
            kind=d["kind"],
            out_channels=d.get("out_channels"),
            kernel=tuple(kernel) if kernel is not None else None,
            out_features=d.get("out_features"),
            dropout_rate=d.get("dropout_rate"),
        )


def cnn_specs(n_classes, conv_channels=(64, 32), hidden=32, dropout_rate=0.5):
    """The two-conv classifier shape used throughout: Conv(1,7) -> ReLU ->
    Conv(2,7) -> ReLU -> Dropout -> Flatten -> Linear(hidden) -> Linear(C)."""
    c1, c2 = conv_channels
    return [
        LayerSpec.conv2d(c1, (1, 7)),
        LayerSpec.relu(),
        LayerSpec.conv2d(c2, (2, 7)),
        LayerSpec.relu(),
        LayerSpec.dropout(dropout_rate),
        LayerSpec.flatten(),
        LayerSpec.linear(hidden),
        LayerSpec.linear(n_classes),
    ]


def chain_shapes(specs, input_shape):
    """Walk (C, H, W) through the specs; returns the per-layer input shapes.

    input_shape is the (2, N) frame shape; the walk starts at (1, 2, N).
    Raises when a convolution underflows or a linear follows an unflattened
    tensor.
    """
    h, w = input_shape
    shape = (1, int(h), int(w))
    shapes = []
    for spec in specs:
        shapes.append(shape)
        if spec.kind == "conv2d":
            if isinstance(shape, int):
                raise ValueError("conv2d after flatten")
            c, hh, ww = shape
            kh, kw = spec.kernel
            oh, ow = hh - kh + 1, ww - kw + 1
            if oh < 1 or ow < 1:
                raise ValueError(
                    f"conv kernel {spec.kernel} does not fit input {hh}x{ww}"
                )
            shape = (spec.out_channels, oh, ow)
        elif spec.kind == "flatten":
            if isinstance(shape, int):
                raise ValueError("flatten after flatten")
            shape = int(np.prod(shape))
        elif spec.kind == "linear":
            if not isinstance(shape, int):
                raise ValueError("linear needs a flattened input")
            shape = spec.out_features
    shapes.append(shape)
    return shapes


def init_params(specs, input_shape, rng, dtype=np.float32):
    """Kaiming-style uniform weights (bound sqrt(6 / fan_in)), zero biases."""
    shapes = chain_shapes(specs, input_shape)
    weights = []
    for spec, in_shape in zip(specs, shapes):
        if spec.kind == "conv2d":
            in_c = in_shape[0]
            kh, kw = spec.kernel
            fan_in = in_c * kh * kw
            bound = np.sqrt(6.0 / fan_in)
            w = rng.uniform(-bound, bound, size=(spec.out_channels, in_c, kh, kw))
            weights.append([w.astype(dtype), np.zeros(spec.out_channels, dtype=dtype)])
        elif spec.kind == "linear":
            fan_in = in_shape
            bound = np.sqrt(6.0 / fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, spec.out_features))
            weights.append([w.astype(dtype), np.zeros(spec.out_features, dtype=dtype)])
        else:
            weights.append([])
    return weights


class Network:
    """A sequential model over (B, 2, N) batches."""

    def __init__(self, specs, weights, input_shape, trainable=None):
        self.specs = list(specs)
        self.input_shape = tuple(int(v) for v in input_shape)
        self.shapes = chain_shapes(self.specs, self.input_shape)
        if trainable is None:
            trainable = [True] * len(self.specs)
        if len(trainable) != len(self.specs):
            raise ValueError("trainable mask length must equal layer count")
        self.trainable = list(trainable)
        self.layers = []
        for spec, w in zip(self.specs, weights):
            if spec.kind == "conv2d":
                self.layers.append(Conv2D(w[0], w[1]))
            elif spec.kind == "relu":
                self.layers.append(ReLU())
            elif spec.kind == "dropout":
                self.layers.append(Dropout(spec.dropout_rate))
            elif spec.kind == "flatten":
                self.layers.append(Flatten())
            elif spec.kind == "linear":
                self.layers.append(Linear(w[0], w[1]))
        self._check_weight_shapes()

    @classmethod
    def build(cls, specs, input_shape=(2, 128), seed=0, dtype=np.float32):
        rng = np.random.default_rng(seed)
        weights = init_params(specs, input_shape, rng, dtype=dtype)
        return cls(specs, weights, input_shape)

    def _check_weight_shapes(self):
        for spec, in_shape, layer in zip(self.specs, self.shapes, self.layers):
            if spec.kind == "conv2d":
                expected = (spec.out_channels, in_shape[0], *spec.kernel)
                if layer.weight.shape != expected:
                    raise ValueError(
                        f"conv weight shape {layer.weight.shape} != {expected}"
                    )
            elif spec.kind == "linear":
                expected = (in_shape, spec.out_features)
                if layer.weight.shape != expected:
                    raise ValueError(
                        f"linear weight shape {layer.weight.shape} != {expected}"
                    )

    @property
    def n_classes(self) -> int:
        return self.shapes[-1]

    def _to_nchw(self, batch):
        x = np.asarray(batch)
        if x.ndim != 3 or x.shape[1:] != self.input_shape:
            raise ValueError(
                f"batch must be (B, {self.input_shape[0]}, {self.input_shape[1]}), got {x.shape}"
            )
        return x.reshape(x.shape[0], 1, *self.input_shape)

    def forward(self, batch, training=False, rng=None):
        """Run the stack; returns (logits, cache). The cache is None in eval
        mode and a ForwardCache in training mode."""
        x = self._to_nchw(batch)
        caches = [] if training else None
        for layer in self.layers:
            x, cache = layer.forward(x, training, rng)
            if training:
                caches.append(cache)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("non-finite logits")
        return x, (ForwardCache(caches, x) if training else None)

    def backward(self, cache, dlogits):
        """Backpropagate; returns gradients aligned with trainable_params()."""
        if cache is None:
            raise ValueError("backward needs the cache from a training-mode forward")
        grads = {}
        dy = dlogits
        for idx in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[idx]
            needs_params = layer.has_params and self.trainable[idx]
            # input grads are still needed below frozen layers
            dy, param_grads = layer.backward(cache.layer_caches[idx], dy)
            if needs_params:
                grads[idx] = param_grads
        out = []
        for idx, _ in self.trainable_params():
            out.extend(grads[idx])
        return out

    def trainable_params(self):
        """(layer index, [arrays]) for layers that both have and train params."""
        return [
            (i, layer.params)
            for i, layer in enumerate(self.layers)
            if layer.has_params and self.trainable[i]
        ]

    def flat_trainable(self):
        out = []
        for _, params in self.trainable_params():
            out.extend(params)
        return out

    def count_parameters(self, trainable_only=False) -> int:
        total = 0
        for i, layer in enumerate(self.layers):
            if not layer.has_params:
                continue
            if trainable_only and not self.trainable[i]:
                continue
            total += sum(p.size for p in layer.params)
        return int(total)

    def last_linear_index(self) -> int:
        for i in range(len(self.specs) - 1, -1, -1):
            if self.specs[i].kind == "linear":
                return i
        raise ValueError("model has no final linear layer")

    def penultimate_features(self, batch) -> np.ndarray:
        """Eval-mode activations entering the final linear layer."""
        cut = self.last_linear_index()
        x = self._to_nchw(batch)
        for layer in self.layers[:cut]:
            x, _ = layer.forward(x, False, None)
        return x

    def softmax_probs(self, batch) -> np.ndarray:
        logits, _ = self.forward(batch, training=False)
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)


def forward(model: Network, batch, training=False, rng=None):
    return model.forward(batch, training=training, rng=rng)


def backward(model: Network, cache, labels):
    """Cross-entropy gradients for every trainable parameter."""
    from .loss import cross_entropy

    if cache is None:
        raise ValueError("backward needs the cache from a training-mode forward")
    _, dlogits = cross_entropy(cache.logits, labels)
    return model.backward(cache, dlogits)


def penultimate_features(model: Network, batch):
    return model.penultimate_features(batch)


def softmax_probs(model: Network, batch):
    return model.softmax_probs(batch)
