"""Evaluation metrics: AUROC, accuracy, MCC and decision-curve net benefit."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.optimize import minimize
from scipy.stats import rankdata


def auroc(scores, labels) -> float:
    """Probability that a random positive outranks a random negative.

    Ties get half credit (Mann-Whitney); equals the trapezoidal ROC area.
    Requires both classes to be present.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs both classes present")
    ranks = rankdata(scores)  # average ranks handle ties
    rank_sum = float(np.sum(ranks[labels == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def confusion(predictions, labels) -> tuple[int, int, int, int]:
    """(TP, FP, TN, FN) from binary predictions and labels."""
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    tp = int(np.sum((predictions == 1) & (labels == 1)))
    fp = int(np.sum((predictions == 1) & (labels == 0)))
    tn = int(np.sum((predictions == 0) & (labels == 0)))
    fn = int(np.sum((predictions == 0) & (labels == 1)))
    return tp, fp, tn, fn


def accuracy(predictions, labels) -> float:
    tp, fp, tn, fn = confusion(predictions, labels)
    return (tp + tn) / (tp + fp + tn + fn)


def mcc(conf: tuple[int, int, int, int]) -> float:
    """Matthews correlation coefficient; any zero denominator factor -> 0."""
    tp, fp, tn, fn = conf
    if min(tp, fp, tn, fn) < 0:
        raise ValueError("confusion counts must be nonnegative")
    denom_sq = float(tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom_sq == 0.0:
        return 0.0
    return (tp * tn - fp * fn) / np.sqrt(denom_sq)


def fit_score_squash(train_scores, train_labels) -> tuple[float, float]:
    """Fit a logistic squashing p = 1/(1+exp(a*s+b)) on training scores.

    Maximum-likelihood (Platt-style) so decision scores can be read as
    risks in [0, 1] for decision-curve analysis.  Returns (a, b); ``a`` is
    constrained to be non-positive so higher score means higher risk.
    """
    s = np.asarray(train_scores, dtype=np.float64)
    y = np.asarray(train_labels, dtype=np.float64)

    def nll(theta):
        a, b = theta
        z = np.clip(a * s + b, -500, 500)
        p = 1.0 / (1.0 + np.exp(z))
        p = np.clip(p, 1e-12, 1 - 1e-12)
        return -float(np.sum(y * np.log(p) + (1 - y) * np.log(1 - p)))

    res = minimize(nll, x0=np.array([-1.0, 0.0]), method="Nelder-Mead",
                   options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 2000})
    a, b = res.x
    if a > 0:
        a = 0.0
    return float(a), float(b)


def squash_scores(scores, squash: tuple[float, float]) -> np.ndarray:
    a, b = squash
    z = np.clip(a * np.asarray(scores, dtype=np.float64) + b, -500, 500)
    return 1.0 / (1.0 + np.exp(z))


def default_threshold_grid() -> np.ndarray:
    """0.01 .. 0.99 in steps of 0.01 (covers the clinically relevant band)."""
    return np.round(np.arange(1, 100) * 0.01, 10)


def dca(risks, labels, thresholds=None) -> list[tuple[float, float, float, float]]:
    """Decision-curve analysis.

    Returns rows ``(pt, nb_model, nb_treat_all, nb_treat_none)`` where a
    subject is treated iff risk >= pt and
    ``nb = TP/N - FP/N * pt/(1-pt)``.
    """
    risks = np.asarray(risks, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if np.any(risks < 0) or np.any(risks > 1):
        raise ValueError("risks must lie in [0, 1]")
    if thresholds is None:
        thresholds = default_threshold_grid()
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if np.any(thresholds >= 1.0) or np.any(thresholds <= 0.0):
        raise ValueError("thresholds must lie strictly inside (0, 1)")

    n = len(labels)
    prevalence = float(np.mean(labels))
    curve = []
    for pt in thresholds:
        treated = risks >= pt
        tp = float(np.sum(treated & (labels == 1)))
        fp = float(np.sum(treated & (labels == 0)))
        odds = pt / (1.0 - pt)
        nb_model = tp / n - fp / n * odds
        nb_all = prevalence - (1.0 - prevalence) * odds
        curve.append((float(pt), nb_model, nb_all, 0.0))
    return curve


@dataclass
class EvalReport:
    """Bundle of headline metrics plus the DCA curve."""

    auroc: float
    accuracy: float
    mcc: float
    confusion: tuple[int, int, int, int]
    dca_curve: list[tuple[float, float, float, float]] = field(default_factory=list)

    def to_json(self) -> str:
        d = asdict(self)
        d["confusion"] = list(self.confusion)
        d["dca_curve"] = [list(row) for row in self.dca_curve]
        return json.dumps(d, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        d = json.loads(text)
        return cls(
            auroc=d["auroc"],
            accuracy=d["accuracy"],
            mcc=d["mcc"],
            confusion=tuple(d["confusion"]),
            dca_curve=[tuple(row) for row in d["dca_curve"]],
        )


def evaluate(scores, labels, squash: tuple[float, float] | None = None,
             thresholds=None) -> EvalReport:
    """Full report from decision scores; prediction is score > 0."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    preds = (scores > 0).astype(np.int64)
    conf = confusion(preds, labels)
    if squash is None:
        squash = fit_score_squash(scores, labels)
    curve = dca(squash_scores(scores, squash), labels, thresholds)
    return EvalReport(
        auroc=auroc(scores, labels),
        accuracy=accuracy(preds, labels),
        mcc=mcc(conf),
        confusion=conf,
        dca_curve=curve,
    )


def dca_curve_csv(curve) -> str:
    lines = ["threshold,net_benefit_model,net_benefit_treat_all,net_benefit_treat_none"]
    for pt, nb_m, nb_a, nb_n in curve:
        lines.append(f"{pt:.6g},{nb_m:.10g},{nb_a:.10g},{nb_n:.10g}")
    return "\n".join(lines) + "\n"
