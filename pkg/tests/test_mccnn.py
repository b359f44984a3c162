import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pitchtrack.errors import MissingClass, ShapeError
from pitchtrack.mccnn import (Adam, BalancedBatcher, MccnnNet, NetShape, TrainConfig, load_checkpoint,
                              normalize_channels, save_checkpoint, softmax, train)

from oracles import conv1d_same_loop, mccnn_forward_loop

TINY = NetShape(n_channels=3, length=8, n_classes=2, filters=(2, 2), kernels=(5, 9), hidden=4)


def tiny_net(seed=0):
    net = MccnnNet(TINY, seed=seed, dtype=np.float64)
    rng = np.random.default_rng(seed + 100)
    for b in ("b1", "b2", "b3", "b4"):
        net.params[b] = rng.normal(0, 0.3, net.params[b].shape)
    return net


# -- forward ------------------------------------------------------------------

def test_default_architecture_shapes():
    s = NetShape().param_shapes()
    assert s["W1"] == (5 * 24, 128) and s["W2"] == (9 * 128, 128)
    assert s["W3"] == (160 * 128, 128) and s["W4"] == (128, 2)


def test_zero_net_is_uniform():
    net = MccnnNet(NetShape(length=16, n_classes=5, filters=(4, 4), hidden=8), init="zeros")
    p = net.forward(np.random.default_rng(0).normal(size=(3, 24, 16)))
    assert np.allclose(p, 0.2)


@given(st.integers(0, 10_000))
@settings(max_examples=20)
def test_probabilities_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    net = MccnnNet(TINY, seed=seed, dtype=np.float64)
    p = net.forward(rng.normal(0, 3, size=(4, 3, 8)))
    assert (p >= 0).all()
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)


def test_forward_matches_loop_oracle():
    net = tiny_net(1)
    x = np.random.default_rng(2).normal(size=(3, 8))
    expect = mccnn_forward_loop(net.params, x.T, TINY.kernels)
    assert np.allclose(net.forward(x)[0], expect, rtol=0, atol=1e-12)


def test_conv_oracle_hand_case():
    # one channel, kernel 3, weights (1, 2, 3): out[t] = x[t-1] + 2 x[t] + 3 x[t+1]
    x = np.array([[1.0], [2.0], [3.0]])
    out = conv1d_same_loop(x, np.array([[1.0], [2.0], [3.0]]), np.zeros(1), 3)
    assert out[:, 0].tolist() == [0 + 2 + 6, 1 + 4 + 9, 2 + 6 + 0]


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        tiny_net().forward(np.zeros((1, 3, 9)))
    with pytest.raises(ShapeError):
        tiny_net().forward(np.zeros((1, 4, 8)))


def test_softmax_stable():
    p = softmax(np.array([[1000.0, 1000.0, -1000.0]]))
    assert np.allclose(p, [[0.5, 0.5, 0.0]])


# -- gradients ----------------------------------------------------------------

def numeric_grad(net, X, y, name, h=1e-6):
    p = net.params[name]
    g = np.zeros_like(p)
    it = np.nditer(p, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = p[i]
        p[i] = old + h
        lp, _ = net.loss_and_grads(X, y)
        p[i] = old - h
        lm, _ = net.loss_and_grads(X, y)
        p[i] = old
        g[i] = (lp - lm) / (2 * h)
    return g


def max_relative_error(a, b, floor=1e-8):
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def test_gradients_match_finite_differences():
    net = tiny_net(3)
    rng = np.random.default_rng(4)
    X = rng.normal(size=(5, 3, 8))
    y = np.array([0, 1, 1, 0, 1])
    _, grads = net.loss_and_grads(X, y)
    for name in net.params:
        num = numeric_grad(net, X, y, name)
        assert max_relative_error(grads[name], num) < 1e-4, name


@pytest.mark.property
def test_logit_gradient_is_probs_minus_onehot():
    net = tiny_net(5)
    X = np.random.default_rng(6).normal(size=(4, 3, 8))
    y = np.array([1, 0, 0, 1])
    probs, cache = net.forward(X, cache=True)
    h3 = cache[6]
    _, g = net.loss_and_grads(X, y)
    onehot = np.eye(2)[y]
    assert np.allclose(g["b4"], (probs - onehot).mean(axis=0))
    assert np.allclose(g["W4"], h3.T @ (probs - onehot) / 4)


# -- normalisation ------------------------------------------------------------

def test_normalize_examples():
    X = np.zeros((4, 2, 10))
    X[:, 0] = 7.0
    rng = np.random.default_rng(0)
    X[:, 1] = rng.normal(size=(4, 10))
    X[:, 1] = (X[:, 1] - X[:, 1].mean()) / X[:, 1].std() * 2 + 5
    Z, stats = normalize_channels(X)
    assert np.allclose(Z[:, 0], 0.0)
    assert stats.std[0] == 1.0
    assert np.allclose(Z[:, 1], (X[:, 1] - 5) / 2)
    Z2, _ = normalize_channels(Z)
    assert np.max(np.abs(Z2 - Z)) < 1e-9


def test_normalize_uses_given_stats():
    rng = np.random.default_rng(1)
    train_x, test_x = rng.normal(0, 1, (20, 3, 8)), rng.normal(4, 3, (10, 3, 8))
    _, stats = normalize_channels(train_x)
    Zt, _ = normalize_channels(test_x, stats)
    _, test_stats = normalize_channels(test_x)
    assert not np.allclose(test_stats.mean, stats.mean)
    assert np.allclose(Zt, (test_x - stats.mean[None, :, None]) / stats.std[None, :, None])


def test_normalize_empty():
    with pytest.raises(ValueError):
        normalize_channels(np.zeros((0, 3, 8)))


# -- batching / training ------------------------------------------------------

def test_balanced_batches_ten_classes():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 10, 500)
    y[:10] = np.arange(10)
    y[y == 3] = 4  # class 3 becomes tiny
    y[0:2] = 3
    b = BalancedBatcher(y, 10, 40, np.random.default_rng(1))
    for _ in range(100):
        idx = b.next()
        assert len(idx) == 40
        assert np.bincount(y[idx], minlength=10).tolist() == [4] * 10


def test_batcher_errors():
    with pytest.raises(MissingClass):
        BalancedBatcher(np.array([0, 0, 2, 2]), 3, 3, np.random.default_rng(0))
    with pytest.raises(ValueError):
        BalancedBatcher(np.array([0, 1]), 2, 3, np.random.default_rng(0))


def test_adam_first_step_is_lr_times_sign():
    p = {"w": np.array([1.0, -2.0, 3.0])}
    opt = Adam(p, lr=0.1)
    opt.step(p, {"w": np.array([0.5, -4.0, 0.0])})
    assert np.allclose(p["w"], [0.9, -1.9, 3.0], atol=1e-6)


def _separable(n_per=12, T=8, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(T)
    X, y = [], []
    for c, f in enumerate((0.5, 1.5)):
        for _ in range(n_per):
            X.append(np.sin(2 * np.pi * f * t / T + rng.uniform(0, 0.3))[None].repeat(3, 0)
                     + rng.normal(0, 0.1, (3, T)))
            y.append(c)
    return np.array(X), np.array(y)


def test_training_reduces_loss_and_fits():
    X, y = _separable()
    X, _ = normalize_channels(X)
    net = MccnnNet(NetShape(3, 8, 2, (8, 8), (5, 9), 16), seed=0, dtype=np.float64)
    res = train(net, X, y, TrainConfig(learning_rate=0.005, batch_size=8), epochs=60)
    assert res.losses[-1] < 0.5 * res.losses[0]
    assert np.mean(net.predict(X) == y) == 1.0


@pytest.mark.property
def test_training_deterministic():
    X, y = _separable()
    runs = []
    for _ in range(2):
        net = MccnnNet(NetShape(3, 8, 2, (4, 4), (5, 9), 8), seed=2)
        runs.append(train(net, X, y, TrainConfig(batch_size=8, seed=3), epochs=5).losses)
    assert runs[0] == runs[1]


def test_callback_can_stop():
    X, y = _separable()
    net = MccnnNet(NetShape(3, 8, 2, (4, 4), (5, 9), 8))
    res = train(net, X, y, TrainConfig(batch_size=8), epochs=50, callback=lambda e, l: e < 2)
    assert len(res.losses) == 3


def test_train_missing_class():
    X, y = _separable()
    with pytest.raises(MissingClass):
        train(MccnnNet(NetShape(3, 8, 3, (2, 2), (5, 9), 4)), X, y, TrainConfig(batch_size=9), epochs=1)


def test_checkpoint_roundtrip(tmp_path):
    net = tiny_net(7)
    X = np.random.default_rng(0).normal(size=(6, 3, 8))
    _, stats = normalize_channels(X)
    save_checkpoint(tmp_path / "m.npz", net, stats, {"classes": ["a", "b"]})
    back, st2, extra = load_checkpoint(tmp_path / "m.npz")
    assert back.shape == net.shape and extra == {"classes": ["a", "b"]}
    assert np.allclose(back.forward(X), net.forward(X))
    assert np.allclose(st2.mean, stats.mean)
