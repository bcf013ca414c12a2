"""Feed-forward building blocks: dense, activations, dropout, norms,
3x3 convolution, and 2x2 max pooling.

Convention: forward(x, train=False) caches intermediates on self only
when train=True; backward(dout) consumes the cache and accumulates into
Param.grad, returning dL/dinput.
"""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .core import Module, Param, he_normal, prefixed, xavier_uniform


class Dense(Module):
    def __init__(self, n_in: int, n_out: int, rng):
        self.n_in, self.n_out = n_in, n_out
        self.w = Param(xavier_uniform(n_in, n_out, rng))
        self.b = Param(np.zeros(n_out))

    def params(self):
        return [("w", self.w), ("b", self.b)]

    def forward(self, x, train=False):
        x = self.check_input(x, 2, self.n_in, "Dense")
        if train:
            self._x = x
        return x @ self.w.data + self.b.data

    def backward(self, dout):
        self.w.grad += self._x.T @ dout
        self.b.grad += dout.sum(axis=0)
        return dout @ self.w.data.T


class ReLU(Module):
    def forward(self, x, train=False):
        if train:
            self._mask = x > 0
        return np.maximum(x, 0.0)

    def backward(self, dout):
        return dout * self._mask


class LeakyReLU(Module):
    def __init__(self, slope: float = 0.01):
        self.slope = slope

    def forward(self, x, train=False):
        if train:
            self._mask = x > 0
        return np.where(x > 0, x, self.slope * x)

    def backward(self, dout):
        return np.where(self._mask, dout, self.slope * dout)


class Sigmoid(Module):
    def forward(self, x, train=False):
        y = 1.0 / (1.0 + np.exp(-x))
        if train:
            self._y = y
        return y

    def backward(self, dout):
        return dout * self._y * (1.0 - self._y)


class Tanh(Module):
    def forward(self, x, train=False):
        y = np.tanh(x)
        if train:
            self._y = y
        return y

    def backward(self, dout):
        return dout * (1.0 - self._y ** 2)


class Dropout(Module):
    """Inverted dropout: expectation-preserving in train mode, identity in
    inference mode. The rng attribute may be reseeded for reproducibility."""

    def __init__(self, p: float, rng=None):
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout rate {p} outside [0,1)")
        self.p = p
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def forward(self, x, train=False):
        if not train or self.p == 0.0:
            return np.asarray(x, dtype=np.float64)
        mask = (self.rng.random(np.shape(x)) >= self.p) / (1.0 - self.p)
        self._mask = mask
        return x * mask

    def backward(self, dout):
        if self.p == 0.0:
            return dout
        return dout * self._mask


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.dim = dim
        self.eps = eps
        self.gamma = Param(np.ones(dim))
        self.beta = Param(np.zeros(dim))

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def forward(self, x, train=False):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ShapeError(f"LayerNorm: expected last dim {self.dim}, got {x.shape}")
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu) * inv
        if train:
            self._xhat, self._inv = xhat, inv
        return xhat * self.gamma.data + self.beta.data

    def backward(self, dout):
        xhat, inv = self._xhat, self._inv
        self.gamma.grad += (dout * xhat).reshape(-1, self.dim).sum(axis=0)
        self.beta.grad += dout.reshape(-1, self.dim).sum(axis=0)
        dxhat = dout * self.gamma.data
        n = self.dim
        return (inv / n) * (
            n * dxhat
            - dxhat.sum(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
        )


class ChannelNorm2d(Module):
    """Batch normalization over the spatial axes of a (C, H, W) feature
    map, with running statistics for inference."""

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1):
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.gamma = Param(np.ones(channels))
        self.beta = Param(np.zeros(channels))
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def forward(self, x, train=False):
        x = self.check_input(x, 3, None, "ChannelNorm2d")
        if x.shape[0] != self.channels:
            raise ShapeError(f"ChannelNorm2d: expected {self.channels} channels, got {x.shape}")
        if train:
            mu = x.mean(axis=(1, 2))
            var = x.var(axis=(1, 2))
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mu
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * var
        else:
            mu, var = self.running_mean, self.running_var
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu[:, None, None]) * inv[:, None, None]
        if train:
            self._xhat, self._inv = xhat, inv
        return xhat * self.gamma.data[:, None, None] + self.beta.data[:, None, None]

    def backward(self, dout):
        xhat, inv = self._xhat, self._inv
        self.gamma.grad += (dout * xhat).sum(axis=(1, 2))
        self.beta.grad += dout.sum(axis=(1, 2))
        dxhat = dout * self.gamma.data[:, None, None]
        n = xhat.shape[1] * xhat.shape[2]
        return (inv[:, None, None] / n) * (
            n * dxhat
            - dxhat.sum(axis=(1, 2), keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=(1, 2), keepdims=True)
        )


class Conv3x3(Module):
    """3x3 convolution, stride 1, zero padding 1, via im2col."""

    def __init__(self, c_in: int, c_out: int, rng):
        self.c_in, self.c_out = c_in, c_out
        fan_in = c_in * 9
        self.w = Param(he_normal((c_out, fan_in), fan_in, rng))
        self.b = Param(np.zeros(c_out))
        self._idx_shape = None

    def params(self):
        return [("w", self.w), ("b", self.b)]

    def _indices(self, h: int, w: int):
        if self._idx_shape == (h, w):
            return self._idx
        c = np.repeat(np.arange(self.c_in), 9)
        di = np.tile(np.repeat(np.arange(3), 3), self.c_in)
        dj = np.tile(np.arange(3), 3 * self.c_in)
        ii = (np.arange(h)[:, None, None] + di[None, None, :])  # (h,1,k)
        jj = (np.arange(w)[None, :, None] + dj[None, None, :])  # (1,w,k)
        cc = np.broadcast_to(c[None, None, :], (h, w, c.size))
        ii = np.broadcast_to(ii, (h, w, c.size))
        jj = np.broadcast_to(jj, (h, w, c.size))
        self._idx = (cc.reshape(h * w, -1), ii.reshape(h * w, -1), jj.reshape(h * w, -1))
        self._idx_shape = (h, w)
        return self._idx

    def forward(self, x, train=False):
        x = self.check_input(x, 3, None, "Conv3x3")
        if x.shape[0] != self.c_in:
            raise ShapeError(f"Conv3x3: expected {self.c_in} input channels, got {x.shape}")
        _, h, w = x.shape
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
        cc, ii, jj = self._indices(h, w)
        cols = xp[cc, ii, jj]  # (h*w, c_in*9)
        y = cols @ self.w.data.T + self.b.data  # (h*w, c_out)
        if train:
            self._cols, self._hw = cols, (h, w)
        return y.T.reshape(self.c_out, h, w)

    def backward(self, dout):
        h, w = self._hw
        dy = dout.reshape(self.c_out, h * w).T  # (h*w, c_out)
        self.w.grad += dy.T @ self._cols
        self.b.grad += dy.sum(axis=0)
        dcols = dy @ self.w.data  # (h*w, c_in*9)
        dxp = np.zeros((self.c_in, h + 2, w + 2))
        cc, ii, jj = self._indices(h, w)
        np.add.at(dxp, (cc, ii, jj), dcols)
        return dxp[:, 1:-1, 1:-1]


class MaxPool2(Module):
    """2x2 max pooling with stride 2; odd trailing rows/cols are dropped."""

    def forward(self, x, train=False):
        c, h, w = x.shape
        h2, w2 = h // 2, w // 2
        xc = x[:, : h2 * 2, : w2 * 2]
        xr = xc.reshape(c, h2, 2, w2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h2, w2, 4)
        idx = xr.argmax(axis=3)
        y = np.take_along_axis(xr, idx[..., None], axis=3)[..., 0]
        if train:
            self._idx, self._in_shape = idx, (c, h, w)
        return y

    def backward(self, dout):
        c, h, w = self._in_shape
        h2, w2 = h // 2, w // 2
        dxr = np.zeros((c, h2, w2, 4))
        np.put_along_axis(dxr, self._idx[..., None], dout[..., None], axis=3)
        dxc = dxr.reshape(c, h2, w2, 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h2 * 2, w2 * 2)
        dx = np.zeros((c, h, w))
        dx[:, : h2 * 2, : w2 * 2] = dxc
        return dx


class Chain(Module):
    """A straight stack of modules with hand-wired reverse backward."""

    def __init__(self, *modules):
        self.modules = list(modules)

    def params(self):
        out = []
        for i, m in enumerate(self.modules):
            out += prefixed(str(i), m.params())
        return out

    def forward(self, x, train=False):
        for m in self.modules:
            x = m.forward(x, train=train)
        return x

    def backward(self, dout):
        for m in reversed(self.modules):
            dout = m.backward(dout)
        return dout
