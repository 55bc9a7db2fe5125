"""Minimal dense/convolutional network engine in numpy.

Forward/backward for conv-relu-dropout-flatten-linear stacks, stable
cross-entropy, bias-corrected Adam, and self-describing checkpoints. Eval
mode is a pure function of (weights, input); training mode threads an
explicit generator through dropout.
"""

from .network import LayerSpec, Network, backward, cnn_specs, forward, penultimate_features, softmax_probs
from .layers import dropout
from .loss import cross_entropy
from .optim import OptimizerState, adam_step
from .checkpoint import ModelCheckpoint, build_network, from_network, load_checkpoint, save_checkpoint

__all__ = [
    "LayerSpec",
    "Network",
    "cnn_specs",
    "forward",
    "backward",
    "penultimate_features",
    "softmax_probs",
    "dropout",
    "cross_entropy",
    "OptimizerState",
    "adam_step",
    "ModelCheckpoint",
    "save_checkpoint",
    "load_checkpoint",
    "build_network",
    "from_network",
]
