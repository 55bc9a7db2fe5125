"""Training procedures: pretraining, head re-training, fine-tuning, top-1 eval.

All three procedures share one fixed-epoch loop with best-validation-loss
checkpoint restore. Head re-training exploits the frozen body: activations
entering the first stochastic layer are computed once, and only the head
sees Adam updates. That path consumes the generator exactly like the naive
full-forward loop, so results are bit-identical, just cheaper.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dataspec import Dataset
from .nnkernel import (
    ModelCheckpoint,
    OptimizerState,
    adam_step,
    build_network,
    cross_entropy,
    from_network,
)
from .nnkernel.network import Network


class TrainMode(Enum):
    PRETRAIN = "PRETRAIN"
    HEAD_RETRAIN = "HEAD_RETRAIN"
    FINE_TUNE = "FINE_TUNE"


_DEFAULT_LR = {
    TrainMode.PRETRAIN: 0.001,
    TrainMode.HEAD_RETRAIN: 0.001,
    TrainMode.FINE_TUNE: 0.0001,
}


@dataclass(frozen=True)
class TrainRecipe:
    mode: TrainMode
    lr: float | None = None
    epochs: int = 100
    batch: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.lr is None:
            object.__setattr__(self, "lr", _DEFAULT_LR[self.mode])
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")


def best_epoch(val_losses) -> int:
    """1-based epoch of the first minimum validation loss."""
    if len(val_losses) == 0:
        raise ValueError("empty loss history")
    return int(np.argmin(val_losses)) + 1


def _check_datasets(train: Dataset, val: Dataset):
    if train.n_examples == 0 or val.n_examples == 0:
        raise ValueError("empty dataset")
    if train.class_names != val.class_names:
        raise ValueError(
            f"class mismatch: train {train.class_names} vs val {val.class_names}"
        )


def _as_xy(ds: Dataset):
    return ds.frames, ds.labels.astype(np.int64)


def _batched_eval_loss(net: Network, x, y, batch):
    total = 0.0
    for i in range(0, len(x), batch):
        logits, _ = net.forward(x[i : i + batch])
        loss, _ = cross_entropy(logits, y[i : i + batch])
        total += loss * len(x[i : i + batch])
    return total / len(x)


def _snapshot(net: Network):
    return [[p.copy() for p in layer.params] for layer in net.layers]


def _restore(net: Network, weights):
    for layer, arrays in zip(net.layers, weights):
        for p, a in zip(layer.params, arrays):
            p[...] = a


def _provenance(label, epoch, val_loss, recipe, history, **extra):
    prov = {
        "dataset": label,
        "epoch": epoch,
        "val_loss": val_loss,
        "seed": recipe.seed,
        "mode": recipe.mode.value,
        "lr": recipe.lr,
        "epochs": recipe.epochs,
        "val_loss_history": [float(v) for v in history],
    }
    prov.update(extra)
    return prov


def _train_full(net: Network, train, val, recipe):
    """Fixed-epoch loop over all trainable parameters; restores the weights
    of the epoch with minimum validation loss. Returns (epoch, loss, history)."""
    x, y = _as_xy(train)
    xv, yv = _as_xy(val)
    rng = np.random.default_rng([recipe.seed, 1])
    params = net.flat_trainable()
    state = OptimizerState.for_params(params, lr=recipe.lr)
    history = []
    best_loss, best_ep, best_weights = np.inf, 0, None
    for epoch in range(1, recipe.epochs + 1):
        order = rng.permutation(len(x))
        for s in range(0, len(order), recipe.batch):
            idx = order[s : s + recipe.batch]
            logits, cache = net.forward(x[idx], training=True, rng=rng)
            _, dlogits = cross_entropy(logits, y[idx])
            adam_step(state, params, net.backward(cache, dlogits))
        vloss = _batched_eval_loss(net, xv, yv, recipe.batch)
        history.append(vloss)
        if vloss < best_loss:
            best_loss, best_ep, best_weights = vloss, epoch, _snapshot(net)
    if best_weights is not None:
        _restore(net, best_weights)
    else:  # zero-epoch recipe: keep the starting weights
        best_loss = _batched_eval_loss(net, xv, yv, recipe.batch)
    return best_ep, best_loss, history


def _batched_stack(layers, x, batch):
    """Eval-mode pass of x through a frozen layer prefix, in batches."""
    outs = []
    for i in range(0, len(x), batch):
        z = x[i : i + batch]
        for layer in layers:
            z, _ = layer.forward(z, False, None)
        outs.append(z)
    return np.concatenate(outs, axis=0)


def pretrain(model_spec, train: Dataset, val: Dataset, recipe: TrainRecipe, label=None) -> ModelCheckpoint:
    """Train a freshly initialized model on (train, val)."""
    if recipe.mode is not TrainMode.PRETRAIN:
        raise ValueError("recipe.mode must be PRETRAIN")
    _check_datasets(train, val)
    net = Network.build(
        model_spec, input_shape=(2, train.frame_len), seed=[recipe.seed, 0]
    )
    if net.n_classes != len(train.class_names):
        raise ValueError(
            f"model emits {net.n_classes} classes, dataset has {len(train.class_names)}"
        )
    epoch, vloss, history = _train_full(net, train, val, recipe)
    label = label if label is not None else train.extra.get("window", "")
    return from_network(net, train.class_names, _provenance(label, epoch, vloss, recipe, history))


def head_retrain(
    source: ModelCheckpoint,
    target_train: Dataset,
    target_val: Dataset,
    recipe: TrainRecipe,
    warm_start=False,
    label=None,
) -> ModelCheckpoint:
    """Freeze everything but the final linear layer and retrain it.

    The head is re-initialized from recipe.seed unless warm_start is set.
    """
    if recipe.mode is not TrainMode.HEAD_RETRAIN:
        raise ValueError("recipe.mode must be HEAD_RETRAIN")
    _check_datasets(target_train, target_val)
    _check_compatible(source, target_train)

    mask = [False] * len(source.specs)
    last = _last_linear(source.specs)
    mask[last] = True
    net = build_network(source, trainable=mask)
    head = net.layers[last]
    if not warm_start:
        init_rng = np.random.default_rng([recipe.seed, 0])
        fan_in = head.weight.shape[0]
        bound = np.sqrt(6.0 / fan_in)
        head.weight[...] = init_rng.uniform(-bound, bound, size=head.weight.shape)
        head.bias[...] = 0.0

    epoch, vloss, history = _train_head_cached(net, last, target_train, target_val, recipe)
    label = label if label is not None else target_train.extra.get("window", "")
    return from_network(
        net,
        source.class_names,
        _provenance(label, epoch, vloss, recipe, history,
                    source=source.provenance.get("dataset", ""), warm_start=warm_start),
    )


def _train_head_cached(net: Network, last, train, val, recipe):
    """The full loop specialized to a trainable head behind a frozen body."""
    x, y = _as_xy(train)
    xv, yv = _as_xy(val)
    # cache up to the first stochastic layer; replay the rest per batch
    cut = next(
        (i for i, s in enumerate(net.specs[:last]) if s.kind == "dropout"), last
    )
    body, tail = net.layers[:cut], net.layers[cut:last]
    head = net.layers[last]
    feats = _batched_stack(body, net._to_nchw(x), recipe.batch)
    val_in = _batched_stack(body + tail, net._to_nchw(xv), recipe.batch)

    rng = np.random.default_rng([recipe.seed, 1])
    params = head.params
    state = OptimizerState.for_params(params, lr=recipe.lr)
    history = []
    best_loss, best_ep, best_weights = np.inf, 0, None

    def val_loss_now():
        total = 0.0
        for i in range(0, len(val_in), recipe.batch):
            logits, _ = head.forward(val_in[i : i + recipe.batch], False, None)
            loss, _ = cross_entropy(logits, yv[i : i + recipe.batch])
            total += loss * len(val_in[i : i + recipe.batch])
        return total / len(val_in)

    for epoch in range(1, recipe.epochs + 1):
        order = rng.permutation(len(x))
        for s in range(0, len(order), recipe.batch):
            idx = order[s : s + recipe.batch]
            z = feats[idx]
            for layer in tail:
                z, _ = layer.forward(z, True, rng)
            logits, cache = head.forward(z, True, rng)
            _, dlogits = cross_entropy(logits, y[idx])
            _, grads = head.backward(cache, dlogits)
            adam_step(state, params, grads)
        vloss = val_loss_now()
        history.append(vloss)
        if vloss < best_loss:
            best_loss, best_ep = vloss, epoch
            best_weights = [p.copy() for p in params]
    if best_weights is not None:
        for p, a in zip(params, best_weights):
            p[...] = a
    else:
        best_loss = val_loss_now()
    return best_ep, best_loss, history


def fine_tune(
    source: ModelCheckpoint,
    target_train: Dataset,
    target_val: Dataset,
    recipe: TrainRecipe,
    label=None,
) -> ModelCheckpoint:
    """Continue training the whole model from the source weights (head kept)."""
    if recipe.mode is not TrainMode.FINE_TUNE:
        raise ValueError("recipe.mode must be FINE_TUNE")
    _check_datasets(target_train, target_val)
    _check_compatible(source, target_train)
    net = build_network(source, trainable=[True] * len(source.specs))
    epoch, vloss, history = _train_full(net, target_train, target_val, recipe)
    label = label if label is not None else target_train.extra.get("window", "")
    return from_network(
        net,
        source.class_names,
        _provenance(label, epoch, vloss, recipe, history,
                    source=source.provenance.get("dataset", "")),
    )


def evaluate_top1(ckpt: ModelCheckpoint, test: Dataset, batch=256) -> float:
    """Fraction of test examples whose argmax logit matches the label."""
    if test.n_examples == 0:
        raise ValueError("empty test set")
    _check_compatible(ckpt, test)
    net = build_network(ckpt)
    x, y = _as_xy(test)
    hits = 0
    for i in range(0, len(x), batch):
        logits, _ = net.forward(x[i : i + batch])
        hits += int(np.sum(np.argmax(logits, axis=1) == y[i : i + batch]))
    return hits / len(x)


def _last_linear(specs) -> int:
    for i in range(len(specs) - 1, -1, -1):
        if specs[i].kind == "linear":
            return i
    raise ValueError("model has no final linear layer")


def _check_compatible(ckpt: ModelCheckpoint, ds: Dataset):
    if tuple(ckpt.class_names) != tuple(ds.class_names):
        raise ValueError(
            f"class mismatch: checkpoint {ckpt.class_names} vs dataset {ds.class_names}"
        )
    if ckpt.input_shape != (2, ds.frame_len):
        raise ValueError(
            f"feature mismatch: checkpoint expects {ckpt.input_shape}, "
            f"dataset frames are (2, {ds.frame_len})"
        )
