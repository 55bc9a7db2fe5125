"""Network engine tests: shapes, gradients, optimizer, persistence.

The gradient oracle is central finite differences in 64-bit; dropout is
checked by replaying a fixed mask through a stub generator.
"""

import numpy as np
import pytest

from rfxfer.nnkernel import (
    LayerSpec,
    Network,
    OptimizerState,
    adam_step,
    backward,
    build_network,
    cnn_specs,
    cross_entropy,
    dropout,
    forward,
    from_network,
    load_checkpoint,
    penultimate_features,
    save_checkpoint,
    softmax_probs,
)


class _FixedUniform:
    """Generator stub that returns one pre-drawn uniform field, so a
    training-mode forward (dropout included) can be replayed exactly."""

    def __init__(self, seed=0):
        self._rng = np.random.default_rng(seed)
        self._cache = {}

    def random(self, shape):
        key = tuple(shape)
        if key not in self._cache:
            self._cache[key] = self._rng.random(shape)
        return self._cache[key]


def _micro_net(dropout_rate=0.0, dtype=np.float64, seed=2):
    specs = [
        LayerSpec.conv2d(4, (1, 5)),
        LayerSpec.relu(),
        LayerSpec.conv2d(3, (2, 5)),
        LayerSpec.relu(),
        LayerSpec.dropout(dropout_rate),
        LayerSpec.flatten(),
        LayerSpec.linear(6),
        LayerSpec.linear(3),
    ]
    return Network.build(specs, input_shape=(2, 16), seed=seed, dtype=dtype)


def _loss_of(net, x, y, rng=None, training=False):
    logits, _ = net.forward(x, training=training, rng=rng)
    loss, _ = cross_entropy(logits, y)
    return loss


def _gradcheck(net, x, y, rng_factory, eps=1e-5):
    """Max relative error between analytic and central-difference grads."""
    logits, cache = net.forward(x, training=True, rng=rng_factory())
    _, dlogits = cross_entropy(logits, y)
    grads = net.backward(cache, dlogits)
    params = net.flat_trainable()
    worst = 0.0
    check_rng = np.random.default_rng(0)
    for p, g in zip(params, grads):
        picks = check_rng.choice(p.size, size=min(10, p.size), replace=False)
        for flat_idx in picks:
            ix = np.unravel_index(flat_idx, p.shape)
            orig = p[ix]
            p[ix] = orig + eps
            hi = _loss_of(net, x, y, rng=rng_factory(), training=True)
            p[ix] = orig - eps
            lo = _loss_of(net, x, y, rng=rng_factory(), training=True)
            p[ix] = orig
            fd = (hi - lo) / (2 * eps)
            rel = abs(fd - g[ix]) / max(1e-12, abs(fd) + abs(g[ix]))
            worst = max(worst, rel)
    return worst


# ------------------------------------------------------------ specs/shapes


def test_layer_spec_validation():
    with pytest.raises(ValueError):
        LayerSpec(kind="pool")
    with pytest.raises(ValueError):
        LayerSpec.conv2d(0, (1, 7))
    with pytest.raises(ValueError):
        LayerSpec.dropout(1.0)
    spec = LayerSpec.conv2d(8, (2, 7))
    assert LayerSpec.from_dict(spec.to_dict()) == spec


def test_shape_chaining_rejects_oversized_kernel():
    specs = [LayerSpec.conv2d(4, (3, 7))]
    with pytest.raises(ValueError, match="does not fit"):
        Network.build(specs, input_shape=(2, 128))


def test_linear_requires_flatten():
    specs = [LayerSpec.conv2d(4, (1, 7)), LayerSpec.linear(5)]
    with pytest.raises(ValueError, match="flattened"):
        Network.build(specs, input_shape=(2, 128))


def test_batch_shape_mismatch_rejected():
    net = Network.build(cnn_specs(4), input_shape=(2, 128), seed=0)
    with pytest.raises(ValueError, match="batch must be"):
        net.forward(np.zeros((3, 2, 64), dtype=np.float32))


def test_paper_width_parameter_counts():
    net = Network.build(cnn_specs(23, conv_channels=(1500, 96), hidden=65), seed=0)
    head = net.layers[net.last_linear_index()]
    assert head.weight.size + head.bias.size == 1518
    # every listed layer at its stated width, valid convolution
    assert net.count_parameters() == 2_753_519


def test_desk_width_feature_dim():
    net = Network.build(cnn_specs(6), seed=0)
    x = np.zeros((2, 2, 128), dtype=np.float32)
    assert penultimate_features(net, x).shape == (2, 32)


# ---------------------------------------------------------------- forward


def test_zero_weights_give_uniform_softmax():
    net = Network.build(cnn_specs(6), seed=1)
    for layer in net.layers:
        for p in layer.params:
            p[...] = 0.0
    x = np.random.default_rng(0).standard_normal((4, 2, 128)).astype(np.float32)
    logits, _ = forward(net, x)
    assert np.array_equal(logits, np.zeros_like(logits))
    assert np.allclose(softmax_probs(net, x), 1.0 / 6.0)


def test_identity_scale_conv_kernel():
    specs = [LayerSpec.conv2d(1, (1, 1))]
    net = Network.build(specs, input_shape=(2, 8), seed=0)
    net.layers[0].weight[...] = 2.0
    net.layers[0].bias[...] = 0.0
    x = np.ones((1, 2, 8), dtype=np.float32)
    out, _ = net.forward(x)
    assert np.allclose(out, 2.0)


def test_eval_forward_deterministic():
    net = Network.build(cnn_specs(4), seed=3)
    x = np.random.default_rng(1).standard_normal((3, 2, 128)).astype(np.float32)
    a, _ = net.forward(x)
    b, _ = net.forward(x)
    assert np.array_equal(a, b)


def test_training_forward_requires_rng_for_dropout():
    net = Network.build(cnn_specs(4), seed=3)
    x = np.zeros((2, 2, 128), dtype=np.float32)
    with pytest.raises(ValueError, match="generator"):
        net.forward(x, training=True)


# --------------------------------------------------------------- gradients


def test_gradients_match_finite_differences():
    net = _micro_net(dropout_rate=0.0)
    x = np.random.default_rng(3).standard_normal((5, 2, 16))
    y = np.array([0, 1, 2, 0, 1])
    worst = _gradcheck(net, x, y, rng_factory=lambda: None)
    assert worst < 1e-4


def test_gradients_match_finite_differences_through_dropout():
    net = _micro_net(dropout_rate=0.5)
    x = np.random.default_rng(4).standard_normal((4, 2, 16))
    y = np.array([2, 1, 0, 2])
    worst = _gradcheck(net, x, y, rng_factory=lambda: _FixedUniform(seed=11))
    assert worst < 1e-4


def test_frozen_layers_receive_no_gradients():
    net = _micro_net()
    mask = [False] * len(net.specs)
    mask[-1] = True  # head only
    frozen = Network(net.specs, [list(l.params) for l in net.layers],
                     net.input_shape, trainable=mask)
    x = np.random.default_rng(5).standard_normal((3, 2, 16))
    y = np.array([0, 1, 2])
    logits, cache = frozen.forward(x, training=True)
    _, dlogits = cross_entropy(logits, y)
    grads = frozen.backward(cache, dlogits)
    head = frozen.layers[-1]
    assert len(grads) == 2
    assert grads[0].shape == head.weight.shape
    assert grads[1].shape == head.bias.shape
    assert frozen.count_parameters(trainable_only=True) == head.weight.size + head.bias.size


def test_mean_reduction_batch_composition():
    # grad over [a, b] equals the average of the single-example grads
    net = _micro_net()
    rng = np.random.default_rng(6)
    a = rng.standard_normal((1, 2, 16))
    b = rng.standard_normal((1, 2, 16))
    ya, yb = np.array([1]), np.array([2])

    def grads_of(x, y):
        logits, cache = net.forward(x, training=True)
        _, dl = cross_entropy(logits, y)
        return net.backward(cache, dl)

    g_a = grads_of(a, ya)
    g_b = grads_of(b, yb)
    g_ab = grads_of(np.concatenate([a, b]), np.concatenate([ya, yb]))
    for ga, gb, gab in zip(g_a, g_b, g_ab):
        assert np.allclose(gab, (ga + gb) / 2.0, atol=1e-12)


def test_backward_requires_training_cache():
    net = _micro_net()
    x = np.zeros((2, 2, 16))
    with pytest.raises(ValueError, match="cache"):
        backward(net, None, np.array([0, 1]))


def test_backward_free_function_matches_manual():
    net = _micro_net()
    x = np.random.default_rng(7).standard_normal((3, 2, 16))
    y = np.array([0, 2, 1])
    logits, cache = net.forward(x, training=True)
    _, dlogits = cross_entropy(logits, y)
    manual = net.backward(cache, dlogits)
    viafree = backward(net, cache, y)
    for m, f in zip(manual, viafree):
        assert np.array_equal(m, f)


# ------------------------------------------------------------ cross-entropy


def test_cross_entropy_uniform_logits():
    logits = np.zeros((5, 23))
    loss, _ = cross_entropy(logits, np.arange(5) % 23)
    assert loss == pytest.approx(np.log(23), rel=1e-12)


def test_cross_entropy_extreme_margin_stable():
    logits = np.zeros((2, 4))
    logits[0, 1] = 1000.0
    logits[1, 3] = 1000.0
    loss, grad = cross_entropy(logits, np.array([1, 3]))
    assert loss == pytest.approx(0.0, abs=1e-9)
    assert np.all(np.isfinite(grad))


def test_cross_entropy_gradient_finite_difference():
    rng = np.random.default_rng(8)
    logits = rng.standard_normal((3, 4))
    y = np.array([0, 3, 2])
    _, grad = cross_entropy(logits, y)
    eps = 1e-6
    for i in range(3):
        for j in range(4):
            hi = logits.copy()
            hi[i, j] += eps
            lo = logits.copy()
            lo[i, j] -= eps
            fd = (cross_entropy(hi, y)[0] - cross_entropy(lo, y)[0]) / (2 * eps)
            assert grad[i, j] == pytest.approx(fd, abs=1e-6)


def test_cross_entropy_rejects_bad_labels():
    logits = np.zeros((2, 3))
    with pytest.raises(ValueError):
        cross_entropy(logits, np.array([0, 3]))
    with pytest.raises(ValueError):
        cross_entropy(logits, np.array([-1, 0]))


# --------------------------------------------------------------------- Adam


def test_adam_first_step_hand_example():
    w = [np.array([0.0])]
    g = [np.array([2.0])]
    state = OptimizerState.for_params(w, lr=0.001)
    adam_step(state, w, g)
    assert state.step == 1
    assert state.m[0][0] == pytest.approx(0.2, rel=1e-12)
    assert state.v[0][0] == pytest.approx(0.004, rel=1e-12)
    assert w[0][0] == pytest.approx(-0.001 * 2.0 / (2.0 + 1e-8), abs=1e-15)


def test_adam_zero_gradient_no_motion():
    w = [np.full((3,), 1.5)]
    state = OptimizerState.for_params(w)
    adam_step(state, w, [np.zeros(3)])
    assert np.array_equal(w[0], np.full((3,), 1.5))


def test_adam_elementwise_independence():
    w = [np.zeros(2)]
    state = OptimizerState.for_params(w)
    for _ in range(5):
        adam_step(state, w, [np.array([0.7, 0.7])])
    assert w[0][0] == w[0][1]


def test_adam_shape_mismatch():
    w = [np.zeros(3)]
    state = OptimizerState.for_params(w)
    with pytest.raises(ValueError):
        adam_step(state, w, [np.zeros(4)])


def test_memorization_loss_drops_ninety_percent():
    net = Network.build(cnn_specs(4, conv_channels=(8, 8), hidden=16), input_shape=(2, 32), seed=7)
    x = np.random.default_rng(8).standard_normal((20, 2, 32)).astype(np.float32)
    y = np.random.default_rng(9).integers(0, 4, 20)
    state = OptimizerState.for_params(net.flat_trainable(), lr=0.01)
    rng = np.random.default_rng(10)
    first = None
    for _ in range(50):
        logits, cache = net.forward(x, training=True, rng=rng)
        loss, dlogits = cross_entropy(logits, y)
        if first is None:
            first = loss
        adam_step(state, net.flat_trainable(), net.backward(cache, dlogits))
    final, _ = cross_entropy(net.forward(x)[0], y)
    assert final <= 0.1 * first


# ------------------------------------------------------------------ dropout


def test_dropout_rate_zero_identity():
    x = np.random.default_rng(0).standard_normal(100)
    out, mask = dropout(x, 0.0, np.random.default_rng(1), True)
    assert np.array_equal(out, x)
    assert mask is None


def test_dropout_eval_identity():
    x = np.random.default_rng(0).standard_normal(100)
    out, mask = dropout(x, 0.9, np.random.default_rng(1), False)
    assert np.array_equal(out, x)
    assert mask is None


def test_dropout_statistics():
    x = np.ones(100_000, dtype=np.float32)
    out, _ = dropout(x, 0.5, np.random.default_rng(5), True)
    survivors = np.mean(out > 0)
    assert survivors == pytest.approx(0.5, abs=0.01)
    assert np.mean(out) == pytest.approx(1.0, abs=0.02)


# --------------------------------------------------- features and softmax


def test_penultimate_features_eval_deterministic():
    net = Network.build(cnn_specs(5), seed=4)
    x = np.random.default_rng(2).standard_normal((3, 2, 128)).astype(np.float32)
    f1 = penultimate_features(net, x)
    f2 = penultimate_features(net, x)
    assert np.array_equal(f1, f2)
    assert f1.shape == (3, 32)


def test_penultimate_features_requires_linear():
    net = Network.build([LayerSpec.conv2d(4, (1, 7)), LayerSpec.relu()], seed=0)
    with pytest.raises(ValueError, match="linear"):
        net.penultimate_features(np.zeros((1, 2, 128), dtype=np.float32))


def test_softmax_rows_stochastic_and_monotonic():
    net = Network.build(cnn_specs(6), seed=5)
    x = np.random.default_rng(3).standard_normal((8, 2, 128)).astype(np.float32)
    probs = softmax_probs(net, x)
    logits, _ = net.forward(x)
    assert np.all(probs >= 0)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)
    assert np.array_equal(np.argmax(probs, axis=1), np.argmax(logits, axis=1))


# -------------------------------------------------------------- checkpoints


def test_checkpoint_roundtrip_forward_identical(tmp_path):
    net = Network.build(cnn_specs(6), seed=6)
    ckpt = from_network(net, class_names=list("abcdef"), provenance={"epoch": 2, "seed": 6})
    path = save_checkpoint(ckpt, tmp_path / "model.npz")
    restored = build_network(load_checkpoint(path))
    x = np.random.default_rng(4).standard_normal((4, 2, 128)).astype(np.float32)
    a, _ = net.forward(x)
    b, _ = restored.forward(x)
    assert np.array_equal(a, b)


def test_checkpoint_preserves_metadata(tmp_path):
    net = Network.build(cnn_specs(3), seed=1)
    net.trainable = [False] * (len(net.specs) - 1) + [True]
    ckpt = from_network(net, class_names=("x", "y", "z"), provenance={"dataset": "w1", "val_loss": 0.5})
    path = save_checkpoint(ckpt, tmp_path / "m.npz")
    loaded = load_checkpoint(path)
    assert loaded.class_names == ("x", "y", "z")
    assert loaded.trainable_mask == net.trainable
    assert loaded.provenance == {"dataset": "w1", "val_loss": 0.5}
    assert loaded.specs == net.specs
    assert all(a.dtype == np.float64 for arrays in loaded.weights for a in arrays)


def test_checkpoint_tampered_shape_rejected(tmp_path):
    import json

    net = Network.build(cnn_specs(3), seed=1)
    ckpt = from_network(net, class_names=("x", "y", "z"))
    path = save_checkpoint(ckpt, tmp_path / "m.npz")
    with np.load(path) as bundle:
        payload = {k: bundle[k] for k in bundle.files}
    header = json.loads(bytes(payload["header"].tobytes()).decode())
    header["shapes"][0][0][0] += 1  # corrupt one declared dimension
    payload["header"] = np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)
    with open(tmp_path / "bad.npz", "wb") as fp:
        np.savez(fp, **payload)
    with pytest.raises(ValueError, match="shape"):
        load_checkpoint(tmp_path / "bad.npz")


def test_checkpoint_rejects_non_checkpoint(tmp_path):
    np.savez(tmp_path / "junk.npz", a=np.zeros(3))
    with pytest.raises(ValueError, match="header"):
        load_checkpoint(tmp_path / "junk.npz")
