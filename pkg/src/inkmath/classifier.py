"""Stage 2: dual-modal symbol classification.

A BiLSTM pathway reads the normalized trajectory, a VGG-style CNN
pathway reads the rendered glyph with neighbors at half opacity, and a
fusion head (512 -> 256 -> C) joins both with the 9-feature structural
prior mask.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .geometry import rasterize, resample_equidistant, spatial_normalize_symbol
from .nn import (
    AdamW,
    AttentionPool,
    Chain,
    ChannelNorm2d,
    Conv3x3,
    Dense,
    Dropout,
    LayerNorm,
    MaxPool2,
    ModelBundle,
    Module,
    ReLU,
    load_params,
    params_to_arrays,
    softmax,
)
from .nn.core import prefixed
from .nn.losses import class_balanced_ce
from .nn.recurrent import BiLSTM
from .symbols import STRUCT_CATEGORIES, SymbolInventory

TRAJ_DIM = 3  # x, y, pen-up


def featurize_symbol(symbol_traces, context_traces=(), mask=None,
                     m: int = 16, image_size: int = 100):
    """(trajectory tensor, grayscale image, structural mask vector)."""
    symbol_traces = list(symbol_traces)
    seqs = spatial_normalize_symbol(symbol_traces)
    rows = []
    for seq in seqs:
        pts = resample_equidistant(seq, m)
        for p, (x, y) in enumerate(pts):
            rows.append([x, y, 1.0 if p == len(pts) - 1 else 0.0])
    traj = np.array(rows)
    image = rasterize(symbol_traces, context_traces, size=image_size)
    mask_vec = np.zeros(len(STRUCT_CATEGORIES)) if mask is None else np.asarray(mask, dtype=float)
    return traj, image, mask_vec


class DualNet(Module):
    """BiLSTM pathway with per-layer LayerNorm and attention pooling, CNN
    pathway of conv blocks, fused through 512 -> 256 -> C dense layers."""

    ARCH = "dualnet"

    def __init__(self, n_classes: int, hidden: int = 256,
                 lstm_layers: int = 3, conv_channels=(16, 32, 64, 128, 128),
                 image_size: int = 100, m: int = 16,
                 fusion=(512, 256), dropout: float = 0.4, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.n_classes = n_classes
        self.hidden = hidden
        self.lstm_layers_n = lstm_layers
        self.conv_channels = tuple(conv_channels)
        self.image_size = image_size
        self.m = m
        self.fusion_dims = tuple(fusion)
        self.dropout_rate = dropout

        self.lstms = []
        self.norms = []
        dim = TRAJ_DIM
        for _ in range(lstm_layers):
            self.lstms.append(BiLSTM(dim, hidden, rng))
            self.norms.append(LayerNorm(2 * hidden))
            dim = 2 * hidden
        self.pool = AttentionPool(2 * hidden, rng)

        blocks = []
        c_in = 1
        side = image_size
        for c_out in self.conv_channels:
            blocks.append(Conv3x3(c_in, c_out, rng))
            blocks.append(ChannelNorm2d(c_out))
            blocks.append(ReLU())
            blocks.append(MaxPool2())
            c_in = c_out
            side //= 2
        self.conv = Chain(*blocks)
        self.flat_dim = c_in * side * side
        self.cnn_proj = Dense(self.flat_dim, 2 * hidden, rng)
        self.cnn_act = ReLU()

        fdim = 2 * hidden + 2 * hidden + len(STRUCT_CATEGORIES)
        layers = []
        for width in self.fusion_dims:
            layers += [Dense(fdim, width, rng), ReLU(),
                       Dropout(dropout, np.random.default_rng(rng.integers(2 ** 31)))]
            fdim = width
        layers.append(Dense(fdim, n_classes, rng))
        self.fusion = Chain(*layers)

    def params(self):
        out = []
        for i, (l, n) in enumerate(zip(self.lstms, self.norms)):
            out += prefixed(f"lstm{i}", l.params())
            out += prefixed(f"ln{i}", n.params())
        out += prefixed("pool", self.pool.params())
        out += prefixed("conv", self.conv.params())
        out += prefixed("cnn_proj", self.cnn_proj.params())
        out += prefixed("fusion", self.fusion.params())
        return out

    def forward(self, traj, image, mask, train=False):
        h = traj
        for lstm, norm in zip(self.lstms, self.norms):
            h = norm.forward(lstm.forward(h, train=train), train=train)
        seq_vec = self.pool.forward(h, train=train)

        feat = self.conv.forward(image[None, :, :], train=train)
        flat = feat.reshape(1, -1)
        img_vec = self.cnn_act.forward(self.cnn_proj.forward(flat, train=train), train=train)[0]

        fused = np.concatenate([seq_vec, img_vec, mask])[None, :]
        logits = self.fusion.forward(fused, train=train)[0]
        if train:
            self._mask_len = mask.shape[0]
        return logits

    def backward(self, dlogits):
        dfused = self.fusion.backward(dlogits[None, :])[0]
        h2 = 2 * self.hidden
        dseq = dfused[:h2]
        dimg = dfused[h2:2 * h2]
        dflat = self.cnn_proj.backward(self.cnn_act.backward(dimg[None, :]))
        side = self.image_size // (2 ** len(self.conv_channels))
        dfeat = dflat.reshape(self.conv_channels[-1], side, side)
        self.conv.backward(dfeat)

        dh = self.pool.backward(dseq)
        for lstm, norm in zip(reversed(self.lstms), reversed(self.norms)):
            dh = lstm.backward(norm.backward(dh))
        return dh

    def to_bundle(self) -> ModelBundle:
        meta = {"n_classes": self.n_classes, "hidden": self.hidden,
                "lstm_layers": self.lstm_layers_n, "conv_channels": list(self.conv_channels),
                "image_size": self.image_size, "m": self.m,
                "fusion": list(self.fusion_dims), "dropout": self.dropout_rate}
        return ModelBundle(arch=self.ARCH, meta=meta, arrays=params_to_arrays(self.params()))

    @classmethod
    def from_bundle(cls, bundle: ModelBundle) -> "DualNet":
        net = cls(**bundle.meta, rng=np.random.default_rng(0))
        load_params(net.params(), bundle.arrays)
        return net


def classify(features, net: DualNet) -> np.ndarray:
    """Probability vector over the class inventory."""
    traj, image, mask = features
    logits = net.forward(traj, image, mask, train=False)
    return softmax(logits)


def top_k(probs: np.ndarray, inventory: SymbolInventory, k: int = 10) -> list[str]:
    idx = np.argsort(-probs, kind="stable")[:k]
    return [inventory.label(int(i)) for i in idx]


@dataclass
class ClassifierTrainConfig:
    hidden: int = 24
    lstm_layers: int = 2
    conv_channels: tuple = (8, 16)
    image_size: int = 28
    m: int = 12
    fusion: tuple = (64, 48)
    dropout: float = 0.1
    lr: float = 3e-3
    epochs: int = 40
    balanced_patience: int = 5
    seed: int = 0
    clip_norm: float = 5.0
    weight_decay: float = 1e-4
    target_accuracy: float = 0.995


def plateaued(losses, patience: int, min_delta: float = 1e-4) -> bool:
    """Schedule rule: true once `patience` consecutive epochs failed to
    improve on the best loss by at least min_delta."""
    if len(losses) <= patience:
        return False
    best = losses[0]
    stall = 0
    for value in losses[1:]:
        if value < best - min_delta:
            best = value
            stall = 0
        else:
            stall += 1
    return stall >= patience


def train_classifier(dataset, inventory: SymbolInventory,
                     config: ClassifierTrainConfig = ClassifierTrainConfig()) -> DualNet:
    """Two-phase schedule: class-balanced cross-entropy until the loss
    plateaus (patience), then standard unweighted cross-entropy.

    dataset: list of (features, label) where features came from
    featurize_symbol with the same m/image_size as the config. The
    returned net carries a `training_log` dict with per-epoch losses and
    the phase-switch epoch (None if the balanced phase never stalled).
    """
    dataset = list(dataset)
    if not dataset:
        raise DataError("empty classifier dataset")
    for _, label in dataset:
        if label not in inventory:
            raise DataError(f"label {label!r} not in inventory")
    rng = np.random.default_rng(config.seed)
    net = DualNet(n_classes=len(inventory), hidden=config.hidden,
                  lstm_layers=config.lstm_layers, conv_channels=config.conv_channels,
                  image_size=config.image_size, m=config.m,
                  fusion=config.fusion, dropout=config.dropout, rng=rng)
    opt = AdamW(net.params(), lr=config.lr, weight_decay=config.weight_decay,
                clip_norm=config.clip_norm)

    targets = np.array([inventory.index(label) for _, label in dataset])
    counts = np.bincount(targets, minlength=len(inventory)).astype(float)
    freqs = np.where(counts > 0, counts, 1.0) / len(dataset)

    balanced = True
    balanced_losses: list[float] = []
    log = {"losses": [], "phase_switch_epoch": None}
    for epoch in range(config.epochs):
        order = rng.permutation(len(dataset))
        total = 0.0
        for idx in order:
            (traj, image, mask), label = dataset[idx]
            t = np.array([inventory.index(label)])
            opt.zero_grad()
            logits = net.forward(traj, image, mask, train=True)
            loss, dlogits = class_balanced_ce(logits[None, :], t,
                                              freqs if balanced else None,
                                              balanced=balanced)
            net.backward(dlogits[0])
            opt.step()
            total += loss
        total /= len(dataset)
        log["losses"].append(total)
        if balanced:
            balanced_losses.append(total)
            if plateaued(balanced_losses, config.balanced_patience):
                balanced = False  # switch to standard cross-entropy
                log["phase_switch_epoch"] = epoch
        acc = _train_accuracy(net, dataset, inventory)
        if acc >= config.target_accuracy and epoch >= 2:
            break
    net.training_log = log
    return net


def _train_accuracy(net, dataset, inventory) -> float:
    good = 0
    for features, label in dataset:
        probs = classify(features, net)
        if inventory.label(int(np.argmax(probs))) == label:
            good += 1
    return good / len(dataset)
