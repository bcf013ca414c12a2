"""Loss values against closed forms and independent scalar-loop oracles."""
import math

import numpy as np
import pytest

from inkmath.nn.losses import class_balanced_ce, weighted_bce


def test_perfect_predictions_zero_loss():
    pred = np.array([1.0 - 1e-15, 1.0 - 1e-15, 1e-15])
    target = np.array([1.0, 1.0, 0.0])
    loss, _ = weighted_bce(pred, target, w_fg=5.0)
    assert loss == pytest.approx(0.0, abs=1e-9)


def test_half_confidence_closed_form():
    # single foreground element at p = 0.5 with weight 5: loss is 5*ln(2)
    loss, _ = weighted_bce(np.array([0.5]), np.array([1.0]), w_fg=5.0)
    assert loss == pytest.approx(5.0 * math.log(2.0), rel=1e-12)


def test_weighted_bce_matches_scalar_loop():
    rng = np.random.default_rng(0)
    pred = rng.uniform(0.02, 0.98, size=37)
    target = (rng.random(37) > 0.6).astype(float)
    loss, _ = weighted_bce(pred, target, w_fg=5.0)
    total = 0.0
    for p, t in zip(pred, target):
        if t == 1.0:
            total += -5.0 * math.log(p)
        else:
            total += -math.log(1.0 - p)
    assert loss == pytest.approx(total / len(pred), rel=1e-9)


def test_class_balanced_ce_matches_scalar_loop():
    rng = np.random.default_rng(1)
    n, c = 9, 5
    logits = rng.normal(0, 2, size=(n, c))
    target = rng.integers(0, c, size=n)
    freqs = rng.uniform(0.05, 1.0, size=c)
    loss, _ = class_balanced_ce(logits, target, freqs, balanced=True)

    total_w = 0.0
    total = 0.0
    for i in range(n):
        z = logits[i]
        denom = sum(math.exp(v) for v in z)
        logp = math.log(math.exp(z[target[i]]) / denom)
        w = 1.0 / freqs[target[i]]
        total += -w * logp
        total_w += w
    assert loss == pytest.approx(total / total_w, rel=1e-9)


def test_uniform_frequencies_equal_unweighted():
    rng = np.random.default_rng(2)
    logits = rng.normal(size=(6, 4))
    target = rng.integers(0, 4, size=6)
    balanced, _ = class_balanced_ce(logits, target, np.full(4, 0.25), balanced=True)
    plain, _ = class_balanced_ce(logits, target, balanced=False)
    assert balanced == pytest.approx(plain, abs=1e-12)


def test_nonpositive_frequencies_rejected():
    with pytest.raises(ValueError):
        class_balanced_ce(np.zeros((1, 2)), np.array([0]), np.array([0.5, 0.0]))
