"""LSTM and bidirectional LSTM over (T, D) sequences, with full BPTT."""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .core import Module, Param, orthogonal, prefixed, xavier_uniform


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


class LSTM(Module):
    """Single-direction LSTM. Gate layout along the 4H axis: i, f, g, o.
    Forget-gate bias starts at 1.0."""

    def __init__(self, n_in: int, hidden: int, rng):
        self.n_in, self.hidden = n_in, hidden
        self.wx = Param(xavier_uniform(n_in, 4 * hidden, rng))
        self.wh = Param(np.hstack([orthogonal((hidden, hidden), rng) for _ in range(4)]))
        b = np.zeros(4 * hidden)
        b[hidden: 2 * hidden] = 1.0
        self.b = Param(b)

    def params(self):
        return [("wx", self.wx), ("wh", self.wh), ("b", self.b)]

    def forward(self, x, train=False):
        x = self.check_input(x, 2, self.n_in, "LSTM")
        t_len = x.shape[0]
        hsz = self.hidden
        h = np.zeros((t_len, hsz))
        c = np.zeros((t_len, hsz))
        gates = np.zeros((t_len, 4 * hsz))
        h_prev = np.zeros(hsz)
        c_prev = np.zeros(hsz)
        for t in range(t_len):
            z = x[t] @ self.wx.data + h_prev @ self.wh.data + self.b.data
            i = _sigmoid(z[:hsz])
            f = _sigmoid(z[hsz:2 * hsz])
            g = np.tanh(z[2 * hsz:3 * hsz])
            o = _sigmoid(z[3 * hsz:])
            c_t = f * c_prev + i * g
            h_t = o * np.tanh(c_t)
            gates[t] = np.concatenate([i, f, g, o])
            c[t], h[t] = c_t, h_t
            c_prev, h_prev = c_t, h_t
        if train:
            self._x, self._h, self._c, self._gates = x, h, c, gates
        return h

    def backward(self, dout):
        x, h, c, gates = self._x, self._h, self._c, self._gates
        t_len = x.shape[0]
        hsz = self.hidden
        dx = np.zeros_like(x)
        dh_next = np.zeros(hsz)
        dc_next = np.zeros(hsz)
        for t in range(t_len - 1, -1, -1):
            i = gates[t, :hsz]
            f = gates[t, hsz:2 * hsz]
            g = gates[t, 2 * hsz:3 * hsz]
            o = gates[t, 3 * hsz:]
            c_prev = c[t - 1] if t > 0 else np.zeros(hsz)
            h_prev = h[t - 1] if t > 0 else np.zeros(hsz)
            tanh_c = np.tanh(c[t])

            dh = dout[t] + dh_next
            do = dh * tanh_c
            dc = dh * o * (1.0 - tanh_c ** 2) + dc_next
            di = dc * g
            dg = dc * i
            df = dc * c_prev
            dc_next = dc * f

            dz = np.concatenate([
                di * i * (1 - i),
                df * f * (1 - f),
                dg * (1 - g ** 2),
                do * o * (1 - o),
            ])
            self.wx.grad += np.outer(x[t], dz)
            self.wh.grad += np.outer(h_prev, dz)
            self.b.grad += dz
            dx[t] = dz @ self.wx.data.T
            dh_next = dz @ self.wh.data.T
        return dx


class BiLSTM(Module):
    """Forward and backward LSTM, outputs concatenated: (T, 2*hidden)."""

    def __init__(self, n_in: int, hidden: int, rng):
        self.n_in, self.hidden = n_in, hidden
        self.fwd = LSTM(n_in, hidden, rng)
        self.bwd = LSTM(n_in, hidden, rng)

    def params(self):
        return prefixed("fwd", self.fwd.params()) + prefixed("bwd", self.bwd.params())

    def forward(self, x, train=False):
        x = self.check_input(x, 2, self.n_in, "BiLSTM")
        hf = self.fwd.forward(x, train=train)
        hb = self.bwd.forward(x[::-1], train=train)[::-1]
        return np.concatenate([hf, hb], axis=1)

    def backward(self, dout):
        hsz = self.hidden
        dxf = self.fwd.backward(dout[:, :hsz])
        dxb = self.bwd.backward(dout[::-1, hsz:])[::-1]
        return dxf + dxb


class StackedBiLSTM(Module):
    """A pile of BiLSTM layers; optional per-layer LayerNorm is left to the
    caller via Chain composition."""

    def __init__(self, n_in: int, hidden: int, layers: int, rng):
        self.layers = []
        dim = n_in
        for _ in range(layers):
            self.layers.append(BiLSTM(dim, hidden, rng))
            dim = 2 * hidden
        self.out_dim = dim

    def params(self):
        out = []
        for i, m in enumerate(self.layers):
            out += prefixed(f"layer{i}", m.params())
        return out

    def forward(self, x, train=False):
        for m in self.layers:
            x = m.forward(x, train=train)
        return x

    def backward(self, dout):
        for m in reversed(self.layers):
            dout = m.backward(dout)
        return dout
