"""Parameter container, initializers, and stable softmax helpers.

Everything runs on float64 numpy arrays. Layers cache intermediates on
self only during training-mode forwards, so inference over shared weights
is thread-safe.
"""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError


class Param:
    """A learnable array with its gradient accumulator."""

    __slots__ = ("data", "grad")

    def __init__(self, data: np.ndarray):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = np.zeros_like(self.data)

    @property
    def shape(self):
        return self.data.shape


class Module:
    """Base class: parameter registry plus train/eval cache discipline."""

    def params(self) -> list[tuple[str, Param]]:
        return []

    def zero_grad(self):
        for _, p in self.params():
            p.grad[...] = 0.0

    def check_input(self, x, ndim: int, last_dim: int | None = None, name: str = ""):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != ndim or (last_dim is not None and x.shape[-1] != last_dim):
            want = f"{ndim}-d" + (f" with last dim {last_dim}" if last_dim else "")
            raise ShapeError(f"{name or type(self).__name__}: expected {want}, got {x.shape}")
        return x


def prefixed(prefix: str, params: list[tuple[str, Param]]) -> list[tuple[str, Param]]:
    return [(f"{prefix}.{name}", p) for name, p in params]


def xavier_uniform(n_in: int, n_out: int, rng) -> np.ndarray:
    bound = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-bound, bound, size=(n_in, n_out))


def he_normal(shape, fan_in: int, rng) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def orthogonal(shape, rng) -> np.ndarray:
    rows, cols = shape
    a = rng.normal(0.0, 1.0, size=(max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return q[:rows, :cols].copy()


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def softmax_backward(alpha: np.ndarray, dalpha: np.ndarray, axis: int = -1) -> np.ndarray:
    """Gradient through y = softmax(z) given dL/dy."""
    inner = (dalpha * alpha).sum(axis=axis, keepdims=True)
    return alpha * (dalpha - inner)
