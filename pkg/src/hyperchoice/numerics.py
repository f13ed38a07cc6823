"""Small numeric helpers shared by the model, baseline and metric modules."""

import numpy as np
from scipy.special import expit

# Probabilities are clamped away from {0, 1} before any log-loss so a single
# confidently wrong prediction cannot produce an infinite loss.
PROB_EPS = 1e-7


def sigmoid(z):
    """Numerically stable logistic function, elementwise."""
    return expit(z)


def clamp_prob(p):
    """Clip probabilities into [PROB_EPS, 1 - PROB_EPS]."""
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def canonical_mean(a, axis: int = 0):
    """Mean over one axis, evaluated in a canonical order.

    Values are sorted and shifted by their minimum before summing, so the
    result is independent of the input order and exactly equal to the
    common value when all entries agree (an ordinary float mean guarantees
    neither).
    """
    a = np.sort(np.asarray(a, dtype=np.float64), axis=axis)
    lo = np.take(a, 0, axis=axis)
    d = a - np.expand_dims(lo, axis)
    return lo + d.sum(axis=axis) / a.shape[axis]


def canonical_std(a, axis: int = 0):
    """Population std over one axis with the same canonical evaluation.

    Exactly zero when all entries along the axis agree.
    """
    a = np.sort(np.asarray(a, dtype=np.float64), axis=axis)
    lo = np.take(a, 0, axis=axis)
    d = a - np.expand_dims(lo, axis)
    dm = d.mean(axis=axis)
    return np.sqrt(((d - np.expand_dims(dm, axis)) ** 2).mean(axis=axis))
