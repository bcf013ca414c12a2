"""Stage 1: incremental symbol segmentation.

A window is built around the rightmost unsegmented trace (MST attachment
order caps candidates at 20), the network scores each candidate trace,
and accepted traces are peeled off as one symbol. The anchor is always
accepted, which guarantees termination.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .geometry import AffineParams, augment, build_trace_graph, mst_sort, normalize_window, rightmost_trace
from .ink import Expression
from .nn import (
    AdamW,
    Dense,
    ModelBundle,
    Module,
    MultiHeadSelfAttention,
    StackedBiLSTM,
    cosine_lr,
    load_params,
    params_to_arrays,
    weighted_bce,
)
from .nn.core import prefixed

FEATURE_DIM = 4  # x, y, trace ordinal, pen-up flag


@dataclass
class SegWindow:
    anchor: int
    candidates: list[int]  # MST attachment order, anchor first
    features: np.ndarray  # (len(candidates) * m, FEATURE_DIM)
    spans: list[tuple[int, int]]  # row range per candidate trace


def build_window(traces, m: int = 16, k: int = 20) -> SegWindow:
    """Candidate window around the rightmost trace of the unsegmented set."""
    traces = list(traces)
    if not traces:
        raise ValueError("no unsegmented traces")
    anchor = rightmost_trace(traces)
    graph = build_trace_graph(traces)
    cand_ids = mst_sort(graph, anchor, k=k)
    by_id = {t.id: t for t in traces}
    cand = [by_id[i] for i in cand_ids]
    seqs, _ = normalize_window(cand, m=m)
    rows = []
    spans = []
    denom = float(max(k - 1, 1))
    for idx, seq in enumerate(seqs):
        start = len(rows)
        for p, (x, y) in enumerate(seq):
            penup = 1.0 if p == len(seq) - 1 else 0.0
            rows.append([x, y, idx / denom, penup])
        spans.append((start, len(rows)))
    return SegWindow(anchor=anchor, candidates=cand_ids,
                     features=np.array(rows), spans=spans)


class SegNet(Module):
    """Two-layer BiLSTM, 8-head self-attention, dense head with sigmoid.
    Per-point logits are pooled to per-trace decisions by mean."""

    ARCH = "segnet"

    def __init__(self, hidden: int = 64, layers: int = 2, heads: int = 8,
                 m: int = 16, k: int = 20, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.hidden, self.layers_n, self.heads = hidden, layers, heads
        self.m, self.k = m, k
        self.lstm = StackedBiLSTM(FEATURE_DIM, hidden, layers, rng)
        self.attn = MultiHeadSelfAttention(2 * hidden, heads, rng)
        self.head = Dense(2 * hidden, 1, rng)

    def params(self):
        return (prefixed("lstm", self.lstm.params())
                + prefixed("attn", self.attn.params())
                + prefixed("head", self.head.params()))

    def forward(self, features, spans, train=False):
        h = self.lstm.forward(features, train=train)
        h = self.attn.forward(h, train=train)
        logits = self.head.forward(h, train=train)[:, 0]
        trace_logits = np.array([logits[a:b].mean() for a, b in spans])
        probs = 1.0 / (1.0 + np.exp(-trace_logits))
        if train:
            self._spans, self._probs, self._n = spans, probs, logits.shape[0]
        return probs

    def backward(self, dprobs):
        dlogit_trace = dprobs * self._probs * (1.0 - self._probs)
        dlogits = np.zeros((self._n, 1))
        for (a, b), g in zip(self._spans, dlogit_trace):
            dlogits[a:b, 0] = g / (b - a)
        dh = self.head.backward(dlogits)
        dh = self.attn.backward(dh)
        return self.lstm.backward(dh)

    def to_bundle(self) -> ModelBundle:
        meta = {"hidden": self.hidden, "layers": self.layers_n, "heads": self.heads,
                "m": self.m, "k": self.k}
        return ModelBundle(arch=self.ARCH, meta=meta, arrays=params_to_arrays(self.params()))

    @classmethod
    def from_bundle(cls, bundle: ModelBundle) -> "SegNet":
        net = cls(**bundle.meta, rng=np.random.default_rng(0))
        load_params(net.params(), bundle.arrays)
        return net


def predict_mask(window: SegWindow, net: SegNet) -> np.ndarray:
    """Per-candidate acceptance probability in (0,1). The anchor is forced
    by the caller; this returns the raw network scores."""
    return net.forward(window.features, window.spans, train=False)


def segment_expression(traces, net: SegNet, threshold: float = 0.5) -> list[set[int]]:
    """Partition trace ids into symbol groups, rightmost symbol first."""
    remaining = list(traces)
    groups: list[set[int]] = []
    while remaining:
        window = build_window(remaining, m=net.m, k=net.k)
        probs = predict_mask(window, net)
        accepted = {cid for cid, p in zip(window.candidates, probs) if p >= threshold}
        accepted.add(window.anchor)
        groups.append(accepted)
        remaining = [t for t in remaining if t.id not in accepted]
    return groups


def replay_windows(expr, slg, m: int = 16, k: int = 20):
    """Teacher-forced window/label pairs from a ground-truth SLG: peel the
    true group of the rightmost trace each round."""
    group_of = {}
    for node in slg.nodes:
        for tid in node.trace_ids:
            group_of[tid] = node.trace_ids
    remaining = list(expr.traces)
    out = []
    while remaining:
        window = build_window(remaining, m=m, k=k)
        true_group = group_of[window.anchor]
        labels = np.array([1.0 if cid in true_group else 0.0 for cid in window.candidates])
        out.append((window, labels))
        remaining = [t for t in remaining if t.id not in true_group]
    return out


@dataclass
class SegTrainConfig:
    hidden: int = 32
    layers: int = 2
    heads: int = 4
    m: int = 12
    k: int = 20
    lr: float = 5e-3
    lr_min: float = 2e-4
    epochs: int = 150
    batch_size: int = 8
    w_fg: float = 5.0
    seed: int = 0
    clip_norm: float = 5.0
    weight_decay: float = 0.0
    augment_params: AffineParams | None = None
    target_window_accuracy: float = 1.0


def window_accuracy(net: SegNet, windows) -> float:
    """Fraction of windows whose thresholded mask matches the labels
    exactly (anchor forced)."""
    good = 0
    for window, labels in windows:
        probs = predict_mask(window, net)
        pred = probs >= 0.5
        pred[0] = True
        if np.array_equal(pred, labels >= 0.5):
            good += 1
    return good / len(windows) if windows else 1.0


def train_segmenter(dataset, config: SegTrainConfig = SegTrainConfig()) -> SegNet:
    """Overfit-capable trainer on (expression, slg) pairs."""
    dataset = list(dataset)
    if not dataset:
        raise DataError("empty segmentation dataset")
    rng = np.random.default_rng(config.seed)
    net = SegNet(hidden=config.hidden, layers=config.layers, heads=config.heads,
                 m=config.m, k=config.k, rng=rng)
    opt = AdamW(net.params(), lr=config.lr, weight_decay=config.weight_decay,
                clip_norm=config.clip_norm)
    base_windows = []
    for expr, slg in dataset:
        base_windows.extend(replay_windows(expr, slg, m=config.m, k=config.k))

    for epoch in range(config.epochs):
        if config.augment_params is not None:
            windows = []
            for expr, slg in dataset:
                aug = augment(expr.traces, config.augment_params, rng)
                aug_expr = Expression(traces=tuple(aug), source_id=expr.source_id)
                windows.extend(replay_windows(aug_expr, slg, m=config.m, k=config.k))
        else:
            windows = base_windows
        lr = cosine_lr(epoch, config.epochs, config.lr, config.lr_min)
        order = rng.permutation(len(windows))
        for b0 in range(0, len(order), config.batch_size):
            batch = order[b0:b0 + config.batch_size]
            opt.zero_grad()
            for idx in batch:
                window, labels = windows[idx]
                probs = net.forward(window.features, window.spans, train=True)
                _, dprobs = weighted_bce(probs, labels, w_fg=config.w_fg)
                net.backward(dprobs / len(batch))
            opt.step(lr=lr)
        if window_accuracy(net, base_windows) >= config.target_window_accuracy:
            break
    return net
