"""Stage 4: transformer-based global classification correction.

Symbols are ordered syntactically (depth-first over the stage-3 SLG,
scripts before right siblings), embedded with trainable positional
encodings, passed through pre-norm encoder layers, and re-classified per
position. Only class distributions change; segmentation and trace
assignment are untouched.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .layout import ordered_node_ids
from .nn import (
    AdamW,
    Chain,
    Dense,
    Dropout,
    LeakyReLU,
    ModelBundle,
    Module,
    PositionalTable,
    TransformerLayer,
    load_params,
    params_to_arrays,
    softmax,
)
from .nn.core import prefixed
from .nn.losses import class_balanced_ce
from .slg import RELATION_CLASSES, StrokeLabelGraph

N_REL = len(RELATION_CLASSES)


def order_symbols(graph: StrokeLabelGraph) -> list[int]:
    """Node ids in syntactic reading order (sup, sub, over, under before
    right at every node)."""
    return ordered_node_ids(graph)


def symbol_step_features(class_probs, bbox, expr_bbox, incoming_rel: str) -> np.ndarray:
    """Per-position input: class distribution, box relative to the
    expression box, incoming-relation one-hot."""
    x0, y0, x1, y1 = bbox
    ex0, ey0, ex1, ey1 = expr_bbox
    ref = max(ex1 - ex0, ey1 - ey0, 1e-9)
    geo = np.array([
        ((x0 + x1) / 2 - (ex0 + ex1) / 2) / ref,
        ((y0 + y1) / 2 - (ey0 + ey1) / 2) / ref,
        (x1 - x0) / ref,
        (y1 - y0) / ref,
    ])
    rel = np.zeros(N_REL)
    rel[RELATION_CLASSES.index(incoming_rel)] = 1.0
    return np.concatenate([np.asarray(class_probs, dtype=float), geo, rel])


class CorrNet(Module):
    """Linear embedding plus trainable positional encodings, a stack of
    pre-norm transformer layers, and a 256 -> 128 -> C head."""

    ARCH = "corrnet"

    def __init__(self, n_classes: int, d_model: int = 256, layers: int = 3,
                 heads: int = 8, max_len: int = 128, head_hidden: int = 128,
                 dropout: float = 0.1, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.n_classes = n_classes
        self.d_model = d_model
        self.layers_n = layers
        self.heads = heads
        self.max_len = max_len
        self.head_hidden = head_hidden
        self.dropout_rate = dropout
        in_dim = n_classes + 4 + N_REL
        self.embed = Dense(in_dim, d_model, rng)
        self.pos = PositionalTable(max_len, d_model, rng)
        self.encoder = Chain(*[TransformerLayer(d_model, heads, rng, dropout=dropout)
                               for _ in range(layers)])
        self.head = Chain(
            Dense(d_model, head_hidden, rng),
            LeakyReLU(0.01),
            Dropout(dropout, np.random.default_rng(rng.integers(2 ** 31))),
            Dense(head_hidden, n_classes, rng),
        )

    def params(self):
        return (prefixed("embed", self.embed.params())
                + prefixed("pos", self.pos.params())
                + prefixed("encoder", self.encoder.params())
                + prefixed("head", self.head.params()))

    def forward(self, x, train=False):
        h = self.pos.forward(self.embed.forward(x, train=train), train=train)
        h = self.encoder.forward(h, train=train)
        return self.head.forward(h, train=train)

    def backward(self, dlogits):
        dh = self.head.backward(dlogits)
        dh = self.encoder.backward(dh)
        return self.embed.backward(self.pos.backward(dh))

    def to_bundle(self) -> ModelBundle:
        meta = {"n_classes": self.n_classes, "d_model": self.d_model,
                "layers": self.layers_n, "heads": self.heads, "max_len": self.max_len,
                "head_hidden": self.head_hidden, "dropout": self.dropout_rate}
        return ModelBundle(arch=self.ARCH, meta=meta, arrays=params_to_arrays(self.params()))

    @classmethod
    def from_bundle(cls, bundle: ModelBundle) -> "CorrNet":
        net = cls(**bundle.meta, rng=np.random.default_rng(0))
        load_params(net.params(), bundle.arrays)
        return net


def correct(step_features: np.ndarray, net: CorrNet) -> np.ndarray:
    """Corrected class distribution per position. Raises CapacityError
    (from the positional table) on overlength sequences."""
    logits = net.forward(np.asarray(step_features, dtype=float), train=False)
    return softmax(logits, axis=-1)


@dataclass
class CorrectorTrainConfig:
    d_model: int = 32
    layers: int = 2
    heads: int = 4
    max_len: int = 64
    head_hidden: int = 32
    dropout: float = 0.0
    lr: float = 3e-3
    epochs_augmented: int = 30
    epochs_clean: int = 10
    batch_size: int = 4
    prob_noise: float = 0.15
    geo_noise: float = 0.05
    seed: int = 0
    clip_norm: float = 5.0
    weight_decay: float = 0.0
    target_accuracy: float = 1.0


def train_corrector(dataset, n_classes: int,
                    config: CorrectorTrainConfig = CorrectorTrainConfig()) -> CorrNet:
    """Two-phase schedule: first with feature augmentation (noise on the
    class probabilities and geometry), then a clean fine-tune on the real
    sequences.

    dataset: list of (step_features (T, F), target class indices (T,)).
    """
    dataset = list(dataset)
    if not dataset:
        raise DataError("empty corrector dataset")
    rng = np.random.default_rng(config.seed)
    net = CorrNet(n_classes=n_classes, d_model=config.d_model, layers=config.layers,
                  heads=config.heads, max_len=config.max_len,
                  head_hidden=config.head_hidden, dropout=config.dropout, rng=rng)
    opt = AdamW(net.params(), lr=config.lr, weight_decay=config.weight_decay,
                clip_norm=config.clip_norm)

    def run_epochs(n_epochs, augmented):
        for _ in range(n_epochs):
            order = rng.permutation(len(dataset))
            for b0 in range(0, len(order), config.batch_size):
                batch = order[b0:b0 + config.batch_size]
                opt.zero_grad()
                for idx in batch:
                    feats, targets = dataset[idx]
                    feats = np.asarray(feats, dtype=float)
                    if augmented:
                        noisy = feats.copy()
                        noisy[:, :n_classes] += rng.normal(
                            0, config.prob_noise, size=(feats.shape[0], n_classes))
                        noisy[:, :n_classes] = np.clip(noisy[:, :n_classes], 0, None)
                        noisy[:, :n_classes] /= np.maximum(
                            noisy[:, :n_classes].sum(axis=1, keepdims=True), 1e-9)
                        noisy[:, n_classes:n_classes + 4] += rng.normal(
                            0, config.geo_noise, size=(feats.shape[0], 4))
                        feats = noisy
                    logits = net.forward(feats, train=True)
                    _, dlogits = class_balanced_ce(logits, np.asarray(targets),
                                                   balanced=False)
                    net.backward(dlogits / len(batch))
                opt.step()
            if sequence_accuracy(net, dataset) >= config.target_accuracy:
                return True
        return False

    done = run_epochs(config.epochs_augmented, augmented=True)
    if not done:
        run_epochs(config.epochs_clean, augmented=False)
    return net


def sequence_accuracy(net: CorrNet, dataset) -> float:
    good = total = 0
    for feats, targets in dataset:
        probs = correct(np.asarray(feats, dtype=float), net)
        good += int((np.argmax(probs, axis=1) == np.asarray(targets)).sum())
        total += len(targets)
    return good / total if total else 1.0
