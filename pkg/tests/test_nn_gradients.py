"""Central finite-difference checks for every layer and loss.

Each layer is probed with a random linear readout so the scalar loss
exercises all output entries. Analytic gradients must match numeric ones
to a relative error below 1e-3 at epsilon 1e-4.
"""
import numpy as np
import pytest

from inkmath.nn import (
    AdamW,
    AttentionPool,
    BiLSTM,
    Chain,
    ChannelNorm2d,
    Conv3x3,
    Dense,
    Dropout,
    LayerNorm,
    LeakyReLU,
    LSTM,
    MaxPool2,
    MultiHeadSelfAttention,
    Param,
    PositionalTable,
    ReLU,
    Sigmoid,
    Tanh,
    TransformerLayer,
    class_balanced_ce,
    clip_gradients,
    weighted_bce,
)

EPS = 1e-4
TOL = 1e-3


def rel_err(a, b):
    denom = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), 1e-8)
    return np.abs(a - b).max(initial=0.0) / denom


def _reseed_dropouts(layer, seed):
    """Dropout layers must see the same mask on every re-evaluation."""
    stack = [layer]
    while stack:
        m = stack.pop()
        if isinstance(m, Dropout):
            m.rng = np.random.default_rng(seed)
        for attr in vars(m).values() if hasattr(m, "__dict__") else []:
            if isinstance(attr, (Dropout, Chain)) or hasattr(attr, "params"):
                stack.append(attr)
            elif isinstance(attr, list):
                stack.extend(a for a in attr if hasattr(a, "params"))


def run_check(make_layer, x_shape, seed=0):
    rng = np.random.default_rng(seed)
    layer = make_layer(np.random.default_rng(seed + 1))
    x = rng.normal(0.0, 1.0, size=x_shape)

    def fwd(inp):
        _reseed_dropouts(layer, seed + 99)
        return layer.forward(inp, train=True)

    out0 = fwd(x)
    readout = np.random.default_rng(seed + 2).normal(size=out0.shape)

    def loss():
        return float((fwd(x) * readout).sum())

    layer.zero_grad()
    fwd(x)
    dx = layer.backward(readout)

    num_dx = np.zeros(x.size)
    flat = x.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + EPS
        up = loss()
        flat[i] = orig - EPS
        dn = loss()
        flat[i] = orig
        num_dx[i] = (up - dn) / (2 * EPS)
    err = rel_err(np.asarray(dx).reshape(-1), num_dx)
    assert err < TOL, f"input gradient off by {err}"

    for name, p in layer.params():
        num = np.zeros(p.data.size)
        flat_p = p.data.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + EPS
            up = loss()
            flat_p[i] = orig - EPS
            dn = loss()
            flat_p[i] = orig
            num[i] = (up - dn) / (2 * EPS)
        err = rel_err(p.grad.reshape(-1), num)
        assert err < TOL, f"param {name} gradient off by {err}"


LAYER_CASES = [
    ("dense", lambda rng: Dense(8, 5, rng), (4, 8)),
    ("relu", lambda rng: ReLU(), (4, 8)),
    ("leaky_relu", lambda rng: LeakyReLU(0.01), (4, 8)),
    ("sigmoid", lambda rng: Sigmoid(), (4, 8)),
    ("tanh", lambda rng: Tanh(), (4, 8)),
    ("dropout", lambda rng: Dropout(0.4), (4, 8)),
    ("layer_norm", lambda rng: LayerNorm(8), (4, 8)),
    ("channel_norm", lambda rng: ChannelNorm2d(3), (3, 5, 6)),
    ("conv3x3", lambda rng: Conv3x3(2, 3, rng), (2, 6, 5)),
    ("maxpool", lambda rng: MaxPool2(), (2, 6, 6)),
    ("lstm", lambda rng: LSTM(6, 4, rng), (5, 6)),
    ("bilstm", lambda rng: BiLSTM(6, 4, rng), (5, 6)),
    ("attention", lambda rng: MultiHeadSelfAttention(8, 2, rng), (4, 8)),
    ("attention_pool", lambda rng: AttentionPool(8, rng), (4, 8)),
    ("positional", lambda rng: PositionalTable(10, 8, rng), (4, 8)),
    ("transformer_layer", lambda rng: TransformerLayer(8, 2, rng, dropout=0.1), (4, 8)),
]


@pytest.mark.parametrize("case", LAYER_CASES, ids=lambda c: c[0])
def test_layer_gradients(case):
    _, make, shape = case
    run_check(make, shape)


def test_weighted_bce_gradient():
    rng = np.random.default_rng(5)
    pred = rng.uniform(0.05, 0.95, size=12)
    target = (rng.random(12) > 0.5).astype(float)
    _, grad = weighted_bce(pred, target, w_fg=5.0)
    num = np.zeros_like(pred)
    for i in range(pred.size):
        up = pred.copy(); up[i] += EPS
        dn = pred.copy(); dn[i] -= EPS
        num[i] = (weighted_bce(up, target, 5.0)[0] - weighted_bce(dn, target, 5.0)[0]) / (2 * EPS)
    assert rel_err(grad, num) < TOL


@pytest.mark.parametrize("balanced", [True, False])
def test_class_balanced_ce_gradient(balanced):
    rng = np.random.default_rng(6)
    logits = rng.normal(0.0, 2.0, size=(6, 5))
    target = rng.integers(0, 5, size=6)
    freqs = rng.uniform(0.05, 1.0, size=5)
    _, grad = class_balanced_ce(logits, target, freqs, balanced=balanced)
    num = np.zeros_like(logits)
    for i in range(logits.size):
        up = logits.copy(); up.reshape(-1)[i] += EPS
        dn = logits.copy(); dn.reshape(-1)[i] -= EPS
        num.reshape(-1)[i] = (
            class_balanced_ce(up, target, freqs, balanced=balanced)[0]
            - class_balanced_ce(dn, target, freqs, balanced=balanced)[0]
        ) / (2 * EPS)
    assert rel_err(grad, num) < TOL


def test_adamw_quadratic_descends():
    rng = np.random.default_rng(7)
    target = rng.normal(0.0, 1.0, size=10)
    p = Param(np.zeros(10))
    opt = AdamW([("p", p)], lr=0.05, weight_decay=0.0, clip_norm=5.0)
    losses = []
    for _ in range(100):
        diff = p.data - target
        losses.append(float((diff ** 2).sum()))
        opt.zero_grad()
        p.grad += 2 * diff
        opt.step()
    # strictly decreasing after warm-up, until converged to the noise floor
    for a, b in zip(losses[5:], losses[6:]):
        if a > losses[0] * 1e-3:
            assert b < a
    assert losses[-1] < losses[0] * 0.01


def test_gradient_clipping_halves_at_double_norm():
    p = Param(np.zeros(4))
    p.grad += np.array([10.0, 0.0, 0.0, 0.0])
    norm = clip_gradients([("p", p)], 5.0)
    assert norm == pytest.approx(10.0)
    assert np.allclose(p.grad, [5.0, 0.0, 0.0, 0.0])


def test_adamw_zero_grad_no_decay_keeps_params():
    p = Param(np.array([1.0, -2.0, 3.0]))
    before = p.data.copy()
    opt = AdamW([("p", p)], lr=0.1, weight_decay=0.0)
    opt.step()
    assert np.array_equal(p.data, before)
