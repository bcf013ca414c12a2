"""Loss functions. Each returns (scalar loss, gradient w.r.t. the first
argument)."""
from __future__ import annotations

import numpy as np

from .core import log_softmax, softmax

_EPS = 1e-12


def weighted_bce(pred, target, w_fg: float = 5.0):
    """Mean binary cross-entropy with the positive class weighted by w_fg.
    pred holds probabilities in (0,1), target holds {0,1}."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    p = np.clip(pred, _EPS, 1.0 - _EPS)
    per = -w_fg * target * np.log(p) - (1.0 - target) * np.log(1.0 - p)
    n = pred.size
    grad = (-w_fg * target / p + (1.0 - target) / (1.0 - p)) / n
    return float(per.mean()), grad


def class_balanced_ce(logits, target, freqs=None, balanced: bool = True):
    """Cross-entropy over (N, C) logits with integer targets.

    When balanced, each sample is weighted by 1/freq of its class and the
    sum is normalized by the total weight; otherwise plain mean CE.
    """
    logits = np.asarray(logits, dtype=np.float64)
    target = np.asarray(target, dtype=np.int64)
    n, c = logits.shape
    logp = log_softmax(logits, axis=-1)
    if balanced:
        if freqs is None:
            raise ValueError("balanced cross-entropy needs class frequencies")
        freqs = np.asarray(freqs, dtype=np.float64)
        if np.any(freqs <= 0):
            raise ValueError("class frequencies must be positive")
        w = 1.0 / freqs[target]
    else:
        w = np.ones(n)
    total_w = w.sum()
    loss = float(-(w * logp[np.arange(n), target]).sum() / total_w)
    grad = softmax(logits, axis=-1)
    grad[np.arange(n), target] -= 1.0
    grad *= (w / total_w)[:, None]
    return loss, grad
