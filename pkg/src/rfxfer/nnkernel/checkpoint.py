"""Self-describing checkpoints: one .npz holding a JSON header plus
little-endian 64-bit weight arrays."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .network import LayerSpec, Network, chain_shapes

_VERSION = 1


@dataclass
class ModelCheckpoint:
    specs: list
    weights: list  # per layer: [] or [weight, bias] as float64 arrays
    trainable_mask: list
    class_names: tuple
    input_shape: tuple
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.class_names = tuple(self.class_names)
        self.input_shape = tuple(int(v) for v in self.input_shape)
        if len(self.weights) != len(self.specs):
            raise ValueError("weights length must equal layer count")
        if len(self.trainable_mask) != len(self.specs):
            raise ValueError("trainable_mask length must equal layer count")
        for spec, arrays, expected in zip(
            self.specs, self.weights, _expected_shapes(self.specs, self.input_shape)
        ):
            got = [tuple(a.shape) for a in arrays]
            if got != expected:
                raise ValueError(
                    f"{spec.kind} weight shapes {got} do not match specs {expected}"
                )


def _expected_shapes(specs, input_shape):
    chained = chain_shapes(specs, input_shape)
    expected = []
    for spec, in_shape in zip(specs, chained):
        if spec.kind == "conv2d":
            expected.append(
                [(spec.out_channels, in_shape[0], *spec.kernel), (spec.out_channels,)]
            )
        elif spec.kind == "linear":
            expected.append([(in_shape, spec.out_features), (spec.out_features,)])
        else:
            expected.append([])
    return expected


def from_network(model: Network, class_names, provenance=None) -> ModelCheckpoint:
    weights = [
        [np.asarray(p, dtype="<f8").copy() for p in layer.params]
        for layer in model.layers
    ]
    return ModelCheckpoint(
        specs=list(model.specs),
        weights=weights,
        trainable_mask=list(model.trainable),
        class_names=tuple(class_names),
        input_shape=model.input_shape,
        provenance=dict(provenance or {}),
    )


def build_network(ckpt: ModelCheckpoint, dtype=np.float32, trainable=None) -> Network:
    weights = [[p.astype(dtype) for p in arrays] for arrays in ckpt.weights]
    mask = list(ckpt.trainable_mask) if trainable is None else list(trainable)
    return Network(ckpt.specs, weights, ckpt.input_shape, trainable=mask)


def save_checkpoint(ckpt: ModelCheckpoint, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "version": _VERSION,
        "specs": [s.to_dict() for s in ckpt.specs],
        "trainable_mask": [bool(b) for b in ckpt.trainable_mask],
        "class_names": list(ckpt.class_names),
        "input_shape": list(ckpt.input_shape),
        "provenance": ckpt.provenance,
        "shapes": [[list(a.shape) for a in arrays] for arrays in ckpt.weights],
    }
    arrays = {
        f"w{i}_{j}": np.asarray(a, dtype="<f8")
        for i, layer_arrays in enumerate(ckpt.weights)
        for j, a in enumerate(layer_arrays)
    }
    with open(path, "wb") as fp:
        np.savez(fp, header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8), **arrays)
    return path


def load_checkpoint(path) -> ModelCheckpoint:
    path = Path(path)
    with np.load(path) as bundle:
        if "header" not in bundle:
            raise ValueError(f"{path.name}: not a checkpoint (missing header)")
        header = json.loads(bytes(bundle["header"].tobytes()).decode())
        if header.get("version") != _VERSION:
            raise ValueError(f"{path.name}: unsupported checkpoint version {header.get('version')}")
        specs = [LayerSpec.from_dict(d) for d in header["specs"]]
        declared = header["shapes"]
        if len(declared) != len(specs):
            raise ValueError(f"{path.name}: shape table length does not match specs")
        weights = []
        for i, layer_shapes in enumerate(declared):
            arrays = []
            for j, shape in enumerate(layer_shapes):
                key = f"w{i}_{j}"
                if key not in bundle:
                    raise ValueError(f"{path.name}: missing weight array {key}")
                arr = np.asarray(bundle[key], dtype=np.float64)
                if list(arr.shape) != list(shape):
                    raise ValueError(
                        f"{path.name}: array {key} shape {arr.shape} != declared {shape}"
                    )
                arrays.append(arr)
            weights.append(arrays)
    return ModelCheckpoint(
        specs=specs,
        weights=weights,
        trainable_mask=header["trainable_mask"],
        class_names=tuple(header["class_names"]),
        input_shape=tuple(header["input_shape"]),
        provenance=header.get("provenance", {}),
    )
