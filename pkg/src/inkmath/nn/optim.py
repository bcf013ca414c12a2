"""AdamW with global-norm gradient clipping, plus cosine annealing."""
from __future__ import annotations

import numpy as np


def global_grad_norm(params) -> float:
    total = 0.0
    for _, p in params:
        total += float((p.grad ** 2).sum())
    return float(np.sqrt(total))


def clip_gradients(params, max_norm: float) -> float:
    """Scale all gradients so the global L2 norm is at most max_norm.
    Returns the pre-clip norm."""
    norm = global_grad_norm(params)
    if max_norm is not None and norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for _, p in params:
            p.grad *= factor
    return norm


def cosine_lr(step: int, total_steps: int, lr_max: float, lr_min: float = 0.0) -> float:
    if total_steps <= 0 or step >= total_steps:
        return lr_min
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + np.cos(np.pi * step / total_steps))


class AdamW:
    """Decoupled weight decay Adam over a (name, Param) list."""

    def __init__(self, params, lr: float = 1e-4, betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0, clip_norm: float | None = 5.0):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.clip_norm = clip_norm
        self.t = 0
        self._m = {name: np.zeros_like(p.data) for name, p in self.params}
        self._v = {name: np.zeros_like(p.data) for name, p in self.params}

    def step(self, lr: float | None = None) -> float:
        """One update from accumulated gradients. Returns the pre-clip
        gradient norm."""
        lr = self.lr if lr is None else lr
        norm = clip_gradients(self.params, self.clip_norm)
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for name, p in self.params:
            g = p.grad
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            if self.weight_decay:
                p.data -= lr * self.weight_decay * p.data
            p.data -= lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)
        return norm

    def zero_grad(self):
        for _, p in self.params:
            p.grad[...] = 0.0
