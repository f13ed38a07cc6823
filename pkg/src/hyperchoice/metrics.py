"""The six test-set metrics: ACC, AUC, AUCPR, ECE, Brier score, NLL.

Definitions are pinned exactly: AUC is the Mann-Whitney pair statistic with
ties scoring 1/2, AUCPR is step-wise average precision with tied scores
grouped, ECE uses equal-width bins on the predicted probability of class 1.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy.stats import rankdata

from .numerics import clamp_prob


@dataclass
class EvalReport:
    """One test-set evaluation."""

    acc: float
    auc: float
    aucpr: float
    ece: float
    brier: float
    nll: float
    n_test: int
    positive_rate: float

    def to_json_dict(self) -> dict:
        return asdict(self)

    METRIC_NAMES = ("acc", "auc", "aucpr", "ece", "brier", "nll")


def _check_pair(p, y):
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} scores vs {y.shape[0]} labels")
    if p.size == 0:
        raise ValueError("empty inputs")
    return p, y


def accuracy(p, y, threshold: float = 0.5) -> float:
    """Fraction of correct classifications; p >= threshold predicts class 1."""
    p, y = _check_pair(p, y)
    return float(np.mean((p >= threshold) == (y == 1)))


def auc_roc(p, y) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 P(tie) over all pairs."""
    p, y = _check_pair(p, y)
    pos = y == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    ranks = rankdata(p, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_pr(p, y) -> float:
    """Average precision: sum of (recall step) x (precision) at each distinct
    descending score, ties grouped."""
    p, y = _check_pair(p, y)
    n_pos = int((y == 1).sum())
    if n_pos == 0:
        raise ValueError("AUCPR needs at least one positive")
    order = np.argsort(-p, kind="stable")
    p_sorted, y_sorted = p[order], y[order]
    tp = fp = 0
    prev_recall = 0.0
    ap = 0.0
    i = 0
    n = p_sorted.size
    while i < n:
        j = i
        while j < n and p_sorted[j] == p_sorted[i]:
            j += 1
        tp += int(y_sorted[i:j].sum())
        fp += (j - i) - int(y_sorted[i:j].sum())
        recall = tp / n_pos
        precision = tp / (tp + fp)
        ap += (recall - prev_recall) * precision
        prev_recall = recall
        i = j
    return float(ap)


def ece(p, y, n_bins: int = 15) -> float:
    """Expected calibration error over equal-width bins on [0, 1].

    Bins are left-closed and right-open except the last, which includes 1.
    Empty bins contribute nothing.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    p, y = _check_pair(p, y)
    idx = np.minimum((p * n_bins).astype(int), n_bins - 1)
    total = 0.0
    n = p.size
    for b in range(n_bins):
        in_bin = idx == b
        n_b = int(in_bin.sum())
        if n_b == 0:
            continue
        conf = p[in_bin].mean()
        frac_pos = y[in_bin].mean()
        total += (n_b / n) * abs(conf - frac_pos)
    return float(total)


def brier(p, y) -> float:
    """Mean squared difference between probability and outcome."""
    p, y = _check_pair(p, y)
    return float(np.mean((p - y) ** 2))


def nll(p, y) -> float:
    """Mean negative log likelihood; probabilities are clamped first."""
    p, y = _check_pair(p, y)
    p = clamp_prob(p)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def evaluate(predict_fn, test, threshold: float = 0.5, n_bins: int = 15) -> EvalReport:
    """Run all six metrics on ``predict_fn(test.X)`` against ``test.y``."""
    p = np.asarray(predict_fn(test.X), dtype=np.float64).reshape(-1)
    y = test.y
    return EvalReport(
        acc=accuracy(p, y, threshold),
        auc=auc_roc(p, y),
        aucpr=auc_pr(p, y),
        ece=ece(p, y, n_bins),
        brier=brier(p, y),
        nll=nll(p, y),
        n_test=int(y.size),
        positive_rate=float(np.mean(y == 1)),
    )
