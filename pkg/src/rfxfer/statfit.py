"""Score/accuracy statistics: correlations, linear fits, prediction intervals.

The weighted rank correlation uses hyperbolic additive weights: elements are
ranked by decreasing value (0-based), element weight is 1/(1+rank), and a
pair weighs w_i + w_j. The statistic is symmetrized by averaging the x-ranked
and y-ranked versions. Ties contribute zero to the numerator but keep their
pair weight in the denominator.

Margins of error are z-scaled MEAN ABSOLUTE residuals: signed OLS residuals
average to zero by construction, so the absolute value is what yields a
usable interval.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

Z_SCORES = {0.90: 1.645, 0.95: 1.960, 0.99: 2.576}

METHODS = ("HEAD", "FINETUNE", "SELF")


@dataclass(frozen=True)
class TransferRecord:
    """One transfer experiment: a (source window, target window, method) cell."""

    source: str
    target: str
    method: str
    accuracy: float
    leep: float
    logme: float

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")

    def score(self, metric: str) -> float:
        if metric == "LEEP":
            return self.leep
        if metric == "LOGME":
            return self.logme
        raise ValueError(f"unknown metric {metric!r}")


@dataclass(frozen=True)
class AccuracyPredictor:
    """Linear score->accuracy map with a z-scaled residual margin."""

    metric: str
    beta0: float  # slope
    beta1: float  # intercept
    mean_abs_residual: float
    n_fit: int

    def __post_init__(self):
        if self.mean_abs_residual < 0:
            raise ValueError("mean_abs_residual must be >= 0")
        if self.n_fit < 3:
            raise ValueError("predictor needs >= 3 fit records")

    def estimate(self, score: float) -> float:
        return self.beta0 * score + self.beta1


@dataclass(frozen=True)
class Prediction:
    estimate: float
    lower: float
    upper: float
    clamped: bool = False


def pearson_r(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("pearson_r needs two equal-length vectors, n >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt(np.sum(dx * dx))
    sy = np.sqrt(np.sum(dy * dy))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("correlation undefined: zero variance")
    return float(np.sum(dx * dy) / (sx * sy))


def _hyperbolic_weights(primary, secondary):
    """Weights 1/(1+rank) where rank orders by decreasing primary value,
    ties broken by decreasing secondary, then by index."""
    n = len(primary)
    order = np.lexsort((np.arange(n), -secondary, -primary))
    weights = np.empty(n)
    weights[order] = 1.0 / (1.0 + np.arange(n))
    return weights


def _one_sided_tau(x, y, weights):
    sign_x = np.sign(x[:, None] - x[None, :])
    sign_y = np.sign(y[:, None] - y[None, :])
    pair_w = weights[:, None] + weights[None, :]
    upper = np.triu(np.ones((len(x), len(x)), dtype=bool), k=1)
    num = np.sum(sign_x[upper] * sign_y[upper] * pair_w[upper])
    den = np.sum(pair_w[upper])
    return num / den


def weighted_tau(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("weighted_tau needs two equal-length vectors, n >= 2")
    tau_x = _one_sided_tau(x, y, _hyperbolic_weights(x, y))
    tau_y = _one_sided_tau(x, y, _hyperbolic_weights(y, x))
    return float(0.5 * (tau_x + tau_y))


def linear_fit(scores, accuracies):
    """Ordinary least squares; returns (slope, intercept)."""
    x = np.asarray(scores, dtype=np.float64)
    y = np.asarray(accuracies, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("linear_fit needs >= 2 points")
    dx = x - x.mean()
    var = np.sum(dx * dx)
    if var == 0.0:
        raise ValueError("fit undefined: zero score variance")
    beta0 = float(np.sum(dx * (y - y.mean())) / var)
    beta1 = float(y.mean() - beta0 * x.mean())
    return beta0, beta1


def margin_of_error(residuals, confidence: float) -> float:
    residuals = np.asarray(residuals, dtype=np.float64)
    if len(residuals) == 0:
        raise ValueError("empty residuals")
    if confidence not in Z_SCORES:
        raise ValueError(f"confidence must be one of {sorted(Z_SCORES)}")
    return float(np.mean(np.abs(residuals)) * Z_SCORES[confidence])


def fit_predictor(records, metric: str, method="HEAD") -> AccuracyPredictor:
    """Fit accuracy = beta0*score + beta1 on one method's transfer records."""
    rows = [r for r in records if r.method == method and r.source != r.target]
    if len(rows) < 3:
        raise ValueError(f"need >= 3 {method} transfer records, have {len(rows)}")
    scores = np.array([r.score(metric) for r in rows])
    accs = np.array([r.accuracy for r in rows])
    beta0, beta1 = linear_fit(scores, accs)
    residuals = accs - (beta0 * scores + beta1)
    return AccuracyPredictor(
        metric=metric,
        beta0=beta0,
        beta1=beta1,
        mean_abs_residual=float(np.mean(np.abs(residuals))),
        n_fit=len(rows),
    )


def predict_accuracy(predictor: AccuracyPredictor, score: float, confidence=0.95) -> Prediction:
    """Point estimate with a z-margin interval, clamped to [0, 1]."""
    if confidence not in Z_SCORES:
        raise ValueError(f"confidence must be one of {sorted(Z_SCORES)}")
    estimate = predictor.estimate(score)
    margin = predictor.mean_abs_residual * Z_SCORES[confidence]
    lower, upper = estimate - margin, estimate + margin
    clamped = bool(estimate < 0 or estimate > 1 or lower < 0 or upper > 1)
    return Prediction(
        float(np.clip(estimate, 0.0, 1.0)),
        float(np.clip(lower, 0.0, 1.0)),
        float(np.clip(upper, 0.0, 1.0)),
        clamped,
    )


def select_source(scores: dict) -> str:
    """Highest-scoring source id; exact ties go to the smallest label."""
    if not scores:
        raise ValueError("no candidate sources")
    best = max(scores.values())
    return min(k for k, v in scores.items() if v == best)


def agreement_frequency(records, leep_predictor, logme_predictor) -> float:
    """Fraction of records where both predictors err on the same side.

    A zero residual agrees with either sign.
    """
    rows = list(records)
    if not rows:
        raise ValueError("empty records")
    agree = 0
    for r in rows:
        s1 = np.sign(r.accuracy - leep_predictor.estimate(r.leep))
        s2 = np.sign(r.accuracy - logme_predictor.estimate(r.logme))
        if s1 == s2 or s1 == 0 or s2 == 0:
            agree += 1
    return agree / len(rows)


def save_predictor(predictor: AccuracyPredictor, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "metric": predictor.metric,
        "beta0": predictor.beta0,
        "beta1": predictor.beta1,
        "mean_abs_residual": predictor.mean_abs_residual,
        "n_fit": predictor.n_fit,
        "z_scores": {f"{k:.2f}": v for k, v in Z_SCORES.items()},
    }
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
    return path


def load_predictor(path) -> AccuracyPredictor:
    payload = json.loads(Path(path).read_text())
    return AccuracyPredictor(
        metric=payload["metric"],
        beta0=float(payload["beta0"]),
        beta1=float(payload["beta1"]),
        mean_abs_residual=float(payload["mean_abs_residual"]),
        n_fit=int(payload["n_fit"]),
    )
