"""Self-attention blocks: multi-head attention, single-query attention
pooling, learned positional table, and a pre-norm transformer encoder
layer."""
from __future__ import annotations

import numpy as np

from ..errors import CapacityError, ShapeError
from .core import Module, Param, prefixed, softmax, softmax_backward, xavier_uniform
from .layers import Dense, Dropout, LayerNorm, ReLU


class MultiHeadSelfAttention(Module):
    def __init__(self, dim: int, heads: int, rng):
        if dim % heads != 0:
            raise ShapeError(f"attention dim {dim} not divisible by {heads} heads")
        self.dim, self.heads = dim, heads
        self.dh = dim // heads
        self.wq = Param(xavier_uniform(dim, dim, rng))
        self.wk = Param(xavier_uniform(dim, dim, rng))
        self.wv = Param(xavier_uniform(dim, dim, rng))
        self.wo = Param(xavier_uniform(dim, dim, rng))
        self.bq = Param(np.zeros(dim))
        self.bk = Param(np.zeros(dim))
        self.bv = Param(np.zeros(dim))
        self.bo = Param(np.zeros(dim))

    def params(self):
        return [("wq", self.wq), ("wk", self.wk), ("wv", self.wv), ("wo", self.wo),
                ("bq", self.bq), ("bk", self.bk), ("bv", self.bv), ("bo", self.bo)]

    def _split(self, m):
        t = m.shape[0]
        return m.reshape(t, self.heads, self.dh).transpose(1, 0, 2)  # (H, T, dh)

    def _merge(self, m):
        h, t, dh = m.shape
        return m.transpose(1, 0, 2).reshape(t, h * dh)

    def forward(self, x, train=False):
        x = self.check_input(x, 2, self.dim, "MultiHeadSelfAttention")
        q = self._split(x @ self.wq.data + self.bq.data)
        k = self._split(x @ self.wk.data + self.bk.data)
        v = self._split(x @ self.wv.data + self.bv.data)
        scale = 1.0 / np.sqrt(self.dh)
        att = softmax(np.einsum("htd,hsd->hts", q, k) * scale, axis=-1)  # (H, T, T)
        ctx = np.einsum("hts,hsd->htd", att, v)
        merged = self._merge(ctx)
        if train:
            self._x, self._q, self._k, self._v = x, q, k, v
            self._att, self._merged = att, merged
        return merged @ self.wo.data + self.bo.data

    def backward(self, dout):
        x, q, k, v, att = self._x, self._q, self._k, self._v, self._att
        scale = 1.0 / np.sqrt(self.dh)
        self.wo.grad += self._merged.T @ dout
        self.bo.grad += dout.sum(axis=0)
        dctx = self._split(dout @ self.wo.data.T)
        datt = np.einsum("htd,hsd->hts", dctx, v)
        dv = np.einsum("hts,htd->hsd", att, dctx)
        dscores = softmax_backward(att, datt, axis=-1) * scale
        dq = np.einsum("hts,hsd->htd", dscores, k)
        dk = np.einsum("hts,htd->hsd", dscores, q)

        dx = np.zeros_like(x)
        for w, b, dm in ((self.wq, self.bq, dq), (self.wk, self.bk, dk), (self.wv, self.bv, dv)):
            flat = self._merge(dm)
            w.grad += x.T @ flat
            b.grad += flat.sum(axis=0)
            dx += flat @ w.data.T
        return dx


class AttentionPool(Module):
    """Pool a (T, D) sequence to a (D,) vector with one learned query."""

    def __init__(self, dim: int, rng):
        self.dim = dim
        self.q = Param(rng.normal(0.0, 1.0 / np.sqrt(dim), size=dim))

    def params(self):
        return [("q", self.q)]

    def forward(self, x, train=False):
        x = self.check_input(x, 2, self.dim, "AttentionPool")
        scale = 1.0 / np.sqrt(self.dim)
        alpha = softmax(x @ self.q.data * scale)
        if train:
            self._x, self._alpha = x, alpha
        return alpha @ x

    def backward(self, dout):
        x, alpha = self._x, self._alpha
        scale = 1.0 / np.sqrt(self.dim)
        dalpha = x @ dout
        dx = np.outer(alpha, dout)
        dscores = softmax_backward(alpha, dalpha)
        self.q.grad += x.T @ dscores * scale
        dx += np.outer(dscores, self.q.data) * scale
        return dx


class PositionalTable(Module):
    """Trainable additive absolute positional encodings."""

    def __init__(self, max_len: int, dim: int, rng):
        self.max_len, self.dim = max_len, dim
        self.table = Param(rng.normal(0.0, 0.02, size=(max_len, dim)))

    def params(self):
        return [("table", self.table)]

    def forward(self, x, train=False):
        x = self.check_input(x, 2, self.dim, "PositionalTable")
        t = x.shape[0]
        if t > self.max_len:
            raise CapacityError(f"sequence length {t} exceeds positional capacity {self.max_len}")
        if train:
            self._t = t
        return x + self.table.data[:t]

    def backward(self, dout):
        self.table.grad[: self._t] += dout
        return dout


class TransformerLayer(Module):
    """Pre-norm encoder layer: x + MHA(LN(x)), then u + FFN(LN(u)).
    The feed-forward inner width is 4 * dim."""

    def __init__(self, dim: int, heads: int, rng, dropout: float = 0.1):
        self.dim = dim
        self.ln1 = LayerNorm(dim)
        self.attn = MultiHeadSelfAttention(dim, heads, rng)
        self.drop1 = Dropout(dropout, np.random.default_rng(rng.integers(2 ** 31)))
        self.ln2 = LayerNorm(dim)
        self.ff1 = Dense(dim, 4 * dim, rng)
        self.act = ReLU()
        self.ff2 = Dense(4 * dim, dim, rng)
        self.drop2 = Dropout(dropout, np.random.default_rng(rng.integers(2 ** 31)))

    def params(self):
        out = []
        for name, mod in (("ln1", self.ln1), ("attn", self.attn), ("ln2", self.ln2),
                          ("ff1", self.ff1), ("ff2", self.ff2)):
            out += prefixed(name, mod.params())
        return out

    def forward(self, x, train=False):
        a = self.drop1.forward(
            self.attn.forward(self.ln1.forward(x, train), train), train)
        u = x + a
        f = self.drop2.forward(
            self.ff2.forward(
                self.act.forward(
                    self.ff1.forward(self.ln2.forward(u, train), train), train), train), train)
        return u + f

    def backward(self, dout):
        df = self.ln2.backward(
            self.ff1.backward(
                self.act.backward(
                    self.ff2.backward(self.drop2.backward(dout)))))
        du = dout + df
        da = self.ln1.backward(self.attn.backward(self.drop1.backward(du)))
        return du + da
