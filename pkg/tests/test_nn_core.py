"""Numeric invariants of the network kernel and model-file round trips."""
import numpy as np
import pytest

from inkmath.errors import ModelError, ShapeError
from inkmath.nn import (
    Chain,
    Dense,
    Dropout,
    LSTM,
    ModelBundle,
    MultiHeadSelfAttention,
    ReLU,
    cosine_lr,
    load_model,
    load_params,
    log_softmax,
    params_to_arrays,
    save_model,
    softmax,
)


def test_softmax_rows_sum_to_one_and_stable():
    rng = np.random.default_rng(0)
    z = rng.normal(0, 3, size=(8, 11))
    s = softmax(z, axis=-1)
    assert np.allclose(s.sum(axis=-1), 1.0, atol=1e-12)
    # extreme logits must not overflow
    big = np.array([[1e4, -1e4, 0.0], [-1e4, -1e4, -1e4]])
    s = softmax(big, axis=-1)
    assert np.isfinite(s).all() and np.allclose(s.sum(axis=-1), 1.0)
    ls = log_softmax(big, axis=-1)
    assert np.isfinite(ls).all()
    assert np.allclose(np.exp(ls).sum(axis=-1), 1.0)


def test_dense_identity_passthrough():
    rng = np.random.default_rng(1)
    layer = Dense(4, 4, rng)
    layer.w.data[...] = np.eye(4)
    layer.b.data[...] = 0.0
    x = rng.normal(size=(3, 4))
    assert np.allclose(layer.forward(x), x)


def test_mha_uniform_attention_averages_values():
    """With zero query/key projections attention is uniform; with identity
    value/output projections each row becomes the mean of the inputs."""
    rng = np.random.default_rng(2)
    mha = MultiHeadSelfAttention(4, 2, rng)
    mha.wq.data[...] = 0.0
    mha.wk.data[...] = 0.0
    mha.bq.data[...] = 0.0
    mha.bk.data[...] = 0.0
    mha.wv.data[...] = np.eye(4)
    mha.bv.data[...] = 0.0
    mha.wo.data[...] = np.eye(4)
    mha.bo.data[...] = 0.0
    x = rng.normal(size=(5, 4))
    out = mha.forward(x)
    assert np.allclose(out, np.tile(x.mean(axis=0), (5, 1)))


def test_dropout_inference_is_identity():
    d = Dropout(0.4, np.random.default_rng(0))
    x = np.random.default_rng(1).normal(size=(7, 9))
    assert np.array_equal(d.forward(x, train=False), x)


def test_dropout_preserves_expectation():
    d = Dropout(0.4, np.random.default_rng(42))
    x = np.ones(100_000)
    y = d.forward(x, train=True)
    assert abs(y.mean() - 1.0) < 0.01


def test_shape_error_names_layer():
    rng = np.random.default_rng(3)
    layer = Dense(4, 2, rng)
    with pytest.raises(ShapeError, match="Dense"):
        layer.forward(np.zeros((3, 5)))


def test_lstm_forget_bias_initialized_to_one():
    rng = np.random.default_rng(4)
    lstm = LSTM(3, 5, rng)
    assert np.allclose(lstm.b.data[5:10], 1.0)
    assert np.allclose(lstm.b.data[:5], 0.0)


def test_bundle_round_trip_exact(tmp_path):
    rng = np.random.default_rng(5)
    arrays = {
        "a.w": rng.normal(size=(7, 3)),
        "a.b": rng.normal(size=3),
        "z": rng.normal(size=(2, 2, 2)).astype(np.float32),
    }
    bundle = ModelBundle(arch="test", meta={"hidden": 7}, arrays=arrays)
    path = tmp_path / "m.imnn"
    save_model(bundle, path)
    loaded = load_model(path)
    assert loaded.arch == "test"
    assert loaded.meta == {"hidden": 7}
    assert set(loaded.arrays) == set(arrays)
    for k in arrays:
        assert loaded.arrays[k].dtype == arrays[k].dtype
        assert np.array_equal(loaded.arrays[k], arrays[k])
        assert loaded.arrays[k].tobytes() == arrays[k].tobytes()


def test_bundle_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.imnn"
    path.write_bytes(b"XXXX" + b"\x00" * 32)
    with pytest.raises(ModelError, match="magic"):
        load_model(path)


def test_loaded_network_replays_forward(tmp_path):
    rng = np.random.default_rng(6)
    net = Chain(Dense(6, 8, rng), ReLU(), Dense(8, 3, rng))
    x = rng.normal(size=(4, 6))
    before = net.forward(x)
    bundle = ModelBundle(arch="chain", arrays=params_to_arrays(net.params()))
    path = tmp_path / "chain.imnn"
    save_model(bundle, path)

    net2 = Chain(Dense(6, 8, np.random.default_rng(99)), ReLU(),
                 Dense(8, 3, np.random.default_rng(98)))
    load_params(net2.params(), load_model(path).arrays)
    assert np.array_equal(net2.forward(x), before)


def test_cosine_schedule_endpoints():
    assert cosine_lr(0, 100, 1e-3) == pytest.approx(1e-3)
    assert cosine_lr(50, 100, 1e-3) == pytest.approx(5e-4)
    assert cosine_lr(100, 100, 1e-3, 1e-5) == pytest.approx(1e-5)


def test_fixed_seed_reproducible_training_step():
    def run():
        rng = np.random.default_rng(123)
        net = Chain(Dense(5, 4, rng), ReLU(), Dense(4, 2, rng))
        from inkmath.nn import AdamW
        opt = AdamW(net.params(), lr=1e-2)
        data_rng = np.random.default_rng(7)
        for _ in range(5):
            x = data_rng.normal(size=(3, 5))
            y = net.forward(x, train=True)
            net_grad = 2 * y
            opt.zero_grad()
            net.backward(net_grad)
            opt.step()
        return [p.data.copy() for _, p in net.params()]

    a = run()
    b = run()
    for pa, pb in zip(a, b):
        assert np.array_equal(pa, pb)
