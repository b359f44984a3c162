"""MC-CNN: a small 1D CNN over joint trajectories, written directly in numpy.

Architecture: conv(k=5) -> ReLU -> conv(k=9) -> ReLU -> flatten -> dense(128)
-> ReLU -> dense(n_classes) -> softmax.  Convolutions use stride 1 and "same"
padding, so the flattened size is T x filters.  Activations are kept
time-major, (batch, T, channels), so every layer is a single matmul.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, asdict, field

import numpy as np

from .errors import MissingClass, ShapeError

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3", "W4", "b4")


@dataclass(frozen=True)
class NetShape:
    n_channels: int = 24
    length: int = 160
    n_classes: int = 2
    filters: tuple = (128, 128)
    kernels: tuple = (5, 9)
    hidden: int = 128

    def param_shapes(self) -> dict:
        c, (f1, f2), (k1, k2) = self.n_channels, self.filters, self.kernels
        return {"W1": (k1 * c, f1), "b1": (f1,), "W2": (k2 * f1, f2), "b2": (f2,),
                "W3": (self.length * f2, self.hidden), "b3": (self.hidden,),
                "W4": (self.hidden, self.n_classes), "b4": (self.n_classes,)}


@dataclass
class TrainConfig:
    learning_rate: float = 0.0005
    batch_size: int = 40
    epochs: int = 2000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    dtype: str = "float32"


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(B, T, C) -> (B, T, k*C) with zero 'same' padding."""
    B, T, C = x.shape
    left = (k - 1) // 2
    xp = np.zeros((B, T + k - 1, C), dtype=x.dtype)
    xp[:, left:left + T] = x
    return np.concatenate([xp[:, i:i + T] for i in range(k)], axis=2)


def _col2im(dcols: np.ndarray, k: int, C: int) -> np.ndarray:
    B, T, _ = dcols.shape
    left = (k - 1) // 2
    dxp = np.zeros((B, T + k - 1, C), dtype=dcols.dtype)
    for i in range(k):
        dxp[:, i:i + T] += dcols[:, :, i * C:(i + 1) * C]
    return dxp[:, left:left + T]


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class MccnnNet:
    def __init__(self, shape: NetShape = NetShape(), seed: int = 0, init: str = "uniform",
                 dtype=np.float32):
        self.shape = shape
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self.params: dict[str, np.ndarray] = {}
        for name, shp in shape.param_shapes().items():
            if name.startswith("b") or init == "zeros":
                self.params[name] = np.zeros(shp, dtype=self.dtype)
            else:
                limit = math.sqrt(6.0 / shp[0])
                self.params[name] = rng.uniform(-limit, limit, shp).astype(self.dtype)

    def astype(self, dtype) -> "MccnnNet":
        net = MccnnNet.__new__(MccnnNet)
        net.shape, net.dtype = self.shape, np.dtype(dtype)
        net.params = {k: v.astype(dtype) for k, v in self.params.items()}
        return net

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=self.dtype)
        if X.ndim == 2:
            X = X[None]
        s = self.shape
        if X.shape[1:] != (s.n_channels, s.length):
            raise ShapeError(f"expected (*, {s.n_channels}, {s.length}), got {X.shape}")
        return X

    def forward(self, X: np.ndarray, cache: bool = False):
        """Class probabilities for X of shape (B, channels, T) or (channels, T)."""
        p = self.params
        k1, k2 = self.shape.kernels
        x = self._check(X).transpose(0, 2, 1)
        B, T, _ = x.shape
        c1 = _im2col(x, k1)
        z1 = c1 @ p["W1"] + p["b1"]
        h1 = np.maximum(z1, 0)
        c2 = _im2col(h1, k2)
        z2 = c2 @ p["W2"] + p["b2"]
        h2 = np.maximum(z2, 0)
        flat = h2.reshape(B, -1)
        z3 = flat @ p["W3"] + p["b3"]
        h3 = np.maximum(z3, 0)
        logits = h3 @ p["W4"] + p["b4"]
        probs = softmax(logits)
        if cache:
            return probs, (c1, z1, c2, z2, flat, z3, h3, logits)
        return probs

    __call__ = forward

    def loss_and_grads(self, X: np.ndarray, y: np.ndarray):
        """Mean cross-entropy and its gradient for every parameter."""
        p = self.params
        probs, (c1, z1, c2, z2, flat, z3, h3, logits) = self.forward(X, cache=True)
        B = probs.shape[0]
        y = np.asarray(y, dtype=int)
        eps = np.finfo(self.dtype).tiny
        loss = float(-np.log(np.maximum(probs[np.arange(B), y], eps)).mean())
        k1, k2 = self.shape.kernels
        f1 = self.shape.filters[0]
        g = {}
        d = probs.copy()
        d[np.arange(B), y] -= 1
        d /= B
        g["W4"] = h3.T @ d
        g["b4"] = d.sum(axis=0)
        d = (d @ p["W4"].T) * (z3 > 0)
        g["W3"] = flat.T @ d
        g["b3"] = d.sum(axis=0)
        d = (d @ p["W3"].T).reshape(z2.shape) * (z2 > 0)
        T = d.shape[1]
        g["W2"] = c2.reshape(B * T, -1).T @ d.reshape(B * T, -1)
        g["b2"] = d.sum(axis=(0, 1))
        d = _col2im(d @ p["W2"].T, k2, f1) * (z1 > 0)
        g["W1"] = c1.reshape(B * T, -1).T @ d.reshape(B * T, -1)
        g["b1"] = d.sum(axis=(0, 1))
        return loss, g

    def predict(self, X: np.ndarray, chunk: int = 64) -> np.ndarray:
        X = self._check(X)
        return np.concatenate([self.forward(X[i:i + chunk]).argmax(axis=1)
                               for i in range(0, len(X), chunk)])


class Adam:
    def __init__(self, params: dict, lr=0.0005, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        lr_t = self.lr * math.sqrt(1 - b2 ** self.t) / (1 - b1 ** self.t)
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            params[k] -= (lr_t * m / (np.sqrt(v) + self.eps)).astype(params[k].dtype)


@dataclass
class ChannelStats:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean[None, :, None]) / self.std[None, :, None]


def normalize_channels(X: np.ndarray, stats: ChannelStats | None = None):
    """Standardise every channel to zero mean / unit variance.

    Statistics are computed over samples and time unless ``stats`` (e.g. from
    the training split) is given.  Constant channels are centred and left at
    scale 1.
    """
    X = np.asarray(X, dtype=float)
    if not X.size:
        raise ValueError("empty dataset")
    if stats is None:
        mean = X.mean(axis=(0, 2))
        std = X.std(axis=(0, 2))
        flat = std <= 1e-12
        if flat.any():
            log.warning("channels %s have zero variance; centring only", np.flatnonzero(flat).tolist())
        std = np.where(flat, 1.0, std)
        stats = ChannelStats(mean, std)
    return stats.apply(X), stats


class BalancedBatcher:
    """Endless batches holding exactly ``batch_size / n_classes`` samples per class.

    Each class is drawn from its own reshuffled cycle, so small classes are
    revisited more often (sampling with replacement across batches).
    """

    def __init__(self, y: np.ndarray, n_classes: int, batch_size: int, rng: np.random.Generator):
        if batch_size % n_classes:
            raise ValueError(f"batch size {batch_size} not divisible by {n_classes} classes")
        self.per_class = batch_size // n_classes
        self.rng = rng
        self.pools = []
        for c in range(n_classes):
            idx = np.flatnonzero(y == c)
            if not len(idx):
                raise MissingClass(f"class {c} has no samples")
            self.pools.append(idx)
        self._queues = [np.empty(0, dtype=int) for _ in self.pools]

    def _take(self, c: int) -> np.ndarray:
        out = []
        need = self.per_class
        while need:
            if not len(self._queues[c]):
                self._queues[c] = self.rng.permutation(self.pools[c])
            q = self._queues[c]
            out.append(q[:need])
            self._queues[c] = q[need:]
            need -= len(out[-1])
        return np.concatenate(out)

    def next(self) -> np.ndarray:
        idx = np.concatenate([self._take(c) for c in range(len(self.pools))])
        return self.rng.permutation(idx)


@dataclass
class TrainResult:
    net: MccnnNet
    losses: list = field(default_factory=list)


def train(net: MccnnNet, X: np.ndarray, y: np.ndarray, config: TrainConfig = TrainConfig(),
          epochs: int | None = None, callback=None) -> TrainResult:
    """Adam on balanced mini-batches; one epoch is ceil(N / batch_size) batches.

    ``X`` should already be channel-normalised.  Returns the net (updated in
    place) and the mean batch loss per epoch.
    """
    X = np.asarray(X, dtype=net.dtype)
    y = np.asarray(y, dtype=int)
    n_classes = net.shape.n_classes
    rng = np.random.default_rng(config.seed)
    batcher = BalancedBatcher(y, n_classes, config.batch_size, rng)
    opt = Adam(net.params, config.learning_rate, config.beta1, config.beta2, config.eps)
    n_batches = max(math.ceil(len(X) / config.batch_size), 1)
    losses = []
    for epoch in range(epochs if epochs is not None else config.epochs):
        total = 0.0
        for _ in range(n_batches):
            idx = batcher.next()
            loss, grads = net.loss_and_grads(X[idx], y[idx])
            opt.step(net.params, grads)
            total += loss
        losses.append(total / n_batches)
        if callback is not None and callback(epoch, losses[-1]) is False:
            break
    return TrainResult(net, losses)


def save_checkpoint(path, net: MccnnNet, stats: ChannelStats | None = None, extra: dict | None = None) -> None:
    meta = {"version": CHECKPOINT_VERSION, "shape": asdict(net.shape), "dtype": net.dtype.name,
            "extra": extra or {}}
    arrays = dict(net.params)
    if stats is not None:
        arrays["norm_mean"], arrays["norm_std"] = stats.mean, stats.std
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_checkpoint(path) -> tuple[MccnnNet, ChannelStats | None, dict]:
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        sd = meta["shape"]
        shape = NetShape(sd["n_channels"], sd["length"], sd["n_classes"], tuple(sd["filters"]),
                         tuple(sd["kernels"]), sd["hidden"])
        net = MccnnNet(shape, init="zeros", dtype=meta["dtype"])
        for k in PARAM_NAMES:
            if z[k].shape != net.params[k].shape:
                raise ShapeError(f"{k}: checkpoint {z[k].shape} vs expected {net.params[k].shape}")
            net.params[k] = z[k].astype(net.dtype)
        stats = ChannelStats(z["norm_mean"], z["norm_std"]) if "norm_mean" in z else None
    return net, stats, meta.get("extra", {})
