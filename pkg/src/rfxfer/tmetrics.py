"""Transferability scores: LEEP and LogME.

Both scores ask "how well would this source model transfer to that labeled
target set" without running any transfer training. LEEP pushes target data
through the source softmax and evaluates the expected empirical predictor;
LogME maximizes the Bayesian linear-model evidence of the target labels
given penultimate features.

Scoring runs the network in 64-bit so the results are independent of batch
partitioning to well below the documented 1e-9 tolerance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dataspec import Dataset
from .nnkernel import ModelCheckpoint, build_network

_LOG_FLOOR = 1e-300  # probabilities clamp here before log
_MARGINAL_FLOOR = 1e-12  # source classes below this mass use the label marginal
_SPECTRUM_FLOOR = 1e-12  # relative floor on Gram eigenvalues
_FP_TOL = 1e-6
_FP_MAX_ITERS = 100


@dataclass(frozen=True)
class TransferabilityScore:
    kind: str  # "LEEP" or "LOGME"
    value: float
    n_examples: int
    source_id: str = ""
    target_id: str = ""

    def __post_init__(self):
        if self.kind not in ("LEEP", "LOGME"):
            raise ValueError(f"unknown score kind {self.kind!r}")
        if not np.isfinite(self.value):
            raise ValueError("score must be finite")
        if self.n_examples < 1:
            raise ValueError("score needs at least one example")


def leep_from_probs(probs, labels, n_target_classes) -> float:
    """LEEP from source-class probabilities and target labels.

    probs[i, z] is the source model's softmax mass on source class z for
    example i; labels[i] is the target label in [0, n_target_classes).
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.ndim != 2 or len(probs) == 0:
        raise ValueError("probs must be a nonempty (n, C_s) matrix")
    if len(labels) != len(probs):
        raise ValueError("labels and probs disagree on n")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValueError("labels must be integers")
    if labels.min() < 0 or labels.max() >= n_target_classes:
        raise ValueError("labels out of range")
    if not np.all(np.isfinite(probs)) or np.any(probs < 0):
        raise ValueError("probs must be finite and nonnegative")
    rows = probs.sum(axis=1)
    if not np.allclose(rows, 1.0, atol=1e-6):
        raise ValueError("probs rows must sum to 1")

    n = len(probs)
    joint = np.zeros((n_target_classes, probs.shape[1]))
    np.add.at(joint, labels, probs)
    joint /= n
    marginal = joint.sum(axis=0)  # P(z)
    label_marginal = joint.sum(axis=1)  # P(y)
    cond = np.empty_like(joint)
    dead = marginal < _MARGINAL_FLOOR
    live = ~dead
    cond[:, live] = joint[:, live] / marginal[live]
    # a source class the model never uses carries no evidence about y
    cond[:, dead] = label_marginal[:, None]
    eep = np.einsum("iz,iz->i", probs, cond[labels])
    return float(np.mean(np.log(np.maximum(eep, _LOG_FLOOR))))


def leep(source: ModelCheckpoint, target: Dataset, batch=256,
         source_id=None, target_id=None) -> TransferabilityScore:
    """Score a source checkpoint against a labeled target dataset."""
    probs, _ = _forward_probs_features(source, target, batch)
    value = leep_from_probs(probs, target.labels, len(target.class_names))
    return TransferabilityScore(
        kind="LEEP",
        value=value,
        n_examples=target.n_examples,
        source_id=_default_id(source_id, source.provenance.get("dataset", "")),
        target_id=_default_id(target_id, target.extra.get("window", "")),
    )


def logme_from_features(features, labels, n_target_classes) -> float:
    """Mean over classes of the maximized per-example log-evidence."""
    f = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if f.ndim != 2 or len(f) == 0:
        raise ValueError("features must be a nonempty (n, F) matrix")
    if len(labels) != len(f):
        raise ValueError("labels and features disagree on n")
    if not np.all(np.isfinite(f)):
        raise ValueError("features must be finite")
    n, dim = f.shape

    gram = f.T @ f
    sigma, basis = np.linalg.eigh(gram)
    top = sigma.max() if len(sigma) else 0.0
    scores = []
    for c in range(n_target_classes):
        y = (labels == c).astype(np.float64)
        n_c = y.sum()
        if n_c == 0:
            warnings.warn(f"class {c} absent from target; skipped in LogME")
            continue
        if top <= 0.0:
            # all-zero features: evidence of the pure-noise model
            beta = n / n_c
            scores.append(0.5 * (np.log(beta) - np.log(2 * np.pi) - 1.0))
            continue
        z = basis.T @ (f.T @ y)
        scores.append(_evidence_fixed_point(np.maximum(sigma, _SPECTRUM_FLOOR * top), z, float(y @ y), n, dim) / n)
    if not scores:
        raise ValueError("no target class has examples")
    return float(np.mean(scores))


def _evidence_fixed_point(sigma, z, yy, n, dim):
    """Maximize the linear-model log-evidence over (alpha, beta)."""
    alpha, beta = 1.0, 1.0
    for _ in range(_FP_MAX_ITERS):
        denom = alpha + beta * sigma
        m = beta * z / denom
        m_sq = float(m @ m)
        residual = float(sigma @ (m * m) - 2.0 * (m @ z) + yy)
        residual = max(residual, 1e-300)
        gamma = float(np.sum(beta * sigma / denom))
        alpha_new = gamma / m_sq if m_sq > 0 else alpha
        beta_new = (n - gamma) / residual if n > gamma else beta
        shift = max(abs(alpha_new - alpha) / alpha, abs(beta_new - beta) / beta)
        alpha, beta = alpha_new, beta_new
        if shift < _FP_TOL:
            break
    denom = alpha + beta * sigma
    m = beta * z / denom
    m_sq = float(m @ m)
    residual = max(float(sigma @ (m * m) - 2.0 * (m @ z) + yy), 1e-300)
    return (
        0.5 * dim * np.log(alpha)
        + 0.5 * n * np.log(beta)
        - 0.5 * n * np.log(2 * np.pi)
        - 0.5 * beta * residual
        - 0.5 * alpha * m_sq
        - 0.5 * np.sum(np.log(denom))
    )


def logme(source: ModelCheckpoint, target: Dataset, batch=256,
          source_id=None, target_id=None) -> TransferabilityScore:
    """LogME of a source checkpoint's penultimate features on a target set."""
    _, features = _forward_probs_features(source, target, batch)
    value = logme_from_features(features, target.labels, len(target.class_names))
    return TransferabilityScore(
        kind="LOGME",
        value=value,
        n_examples=target.n_examples,
        source_id=_default_id(source_id, source.provenance.get("dataset", "")),
        target_id=_default_id(target_id, target.extra.get("window", "")),
    )


def score_pair(source: ModelCheckpoint, target: Dataset, batch=256,
               source_id=None, target_id=None):
    """Both scores from one shared forward pass; identical to separate calls."""
    probs, features = _forward_probs_features(source, target, batch)
    sid = _default_id(source_id, source.provenance.get("dataset", ""))
    tid = _default_id(target_id, target.extra.get("window", ""))
    n_t = len(target.class_names)
    return (
        TransferabilityScore("LEEP", leep_from_probs(probs, target.labels, n_t),
                             target.n_examples, sid, tid),
        TransferabilityScore("LOGME", logme_from_features(features, target.labels, n_t),
                             target.n_examples, sid, tid),
    )


def _forward_probs_features(source: ModelCheckpoint, target: Dataset, batch):
    if target.n_examples == 0:
        raise ValueError("empty target dataset")
    if source.input_shape != (2, target.frame_len):
        raise ValueError(
            f"checkpoint expects {source.input_shape}, frames are (2, {target.frame_len})"
        )
    net = build_network(source, dtype=np.float64)
    head = net.layers[net.last_linear_index()]
    probs, features = [], []
    for i in range(0, target.n_examples, batch):
        feats = net.penultimate_features(target.frames[i : i + batch])
        logits = feats @ head.weight + head.bias
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        probs.append(e / e.sum(axis=1, keepdims=True))
        features.append(feats)
    return np.concatenate(probs, axis=0), np.concatenate(features, axis=0)


def _default_id(explicit, fallback):
    return str(explicit) if explicit is not None else str(fallback)
