"""Stages 3 and 5: pairwise relation scoring and constraint-respecting
tree decoding.

Every symbol queries relations with each later symbol (forward pairs
only). Decoding assigns exactly one incoming edge per non-root node under
the one-max rule: a source emits at most one edge per relation type.
Because pair edges only point forward, the first symbol in writing order
is the only feasible line_start target; per-node line_start scores are
still computed and exposed.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DataError
from .geometry import normalize_window
from .ink import Trace, bbox_of
from .nn import (
    AdamW,
    Dense,
    Dropout,
    LayerNorm,
    LeakyReLU,
    ModelBundle,
    Module,
    MultiHeadSelfAttention,
    StackedBiLSTM,
    cosine_lr,
    load_params,
    log_softmax,
    params_to_arrays,
)
from .nn.core import prefixed, softmax
from .slg import (
    LINE_START,
    NONE,
    PAIR_RELATIONS,
    RELATION_CLASSES,
    ROOT,
    Edge,
)
from .symbols import STRUCT_CATEGORIES, SymbolInventory, struct_category_index

N_REL_CLASSES = len(RELATION_CLASSES)  # none + 5 pair relations + line_start
TOPK = 5
PAIR_POINT_DIM = 4  # x, y, member flag, pen-up
GLOBAL_DIM = 5 + 2 * (TOPK + len(STRUCT_CATEGORIES) * 2)


@dataclass
class SymbolFeature:
    """What the relation network sees of one segmented symbol."""

    traces: list  # Trace objects
    class_probs: np.ndarray  # distribution over the inventory
    mask: np.ndarray  # 9-dim structural prior of the neighborhood
    inventory: SymbolInventory
    expr_bbox: tuple | None = None  # whole-expression box, for root queries

    def bbox(self):
        return bbox_of(self.traces)

    def summary(self) -> np.ndarray:
        """Fixed-size class-distribution embedding: top-k probabilities plus
        probability mass per coarse structural category."""
        probs = np.asarray(self.class_probs, dtype=float)
        top = np.sort(probs)[::-1][:TOPK]
        if top.size < TOPK:
            top = np.pad(top, (0, TOPK - top.size))
        cat = np.zeros(len(STRUCT_CATEGORIES))
        for i, p in enumerate(probs):
            cat[struct_category_index(self.inventory.label(i))] += p
        return np.concatenate([top, cat, np.asarray(self.mask, dtype=float)])


@dataclass
class PairScores:
    n: int
    pairs: dict  # (i, j) with j > i -> log-prob vector over RELATION_CLASSES
    line_start: np.ndarray  # per-node line_start log-probability


def pair_sequence(sym_i: SymbolFeature | None, sym_j: SymbolFeature, m: int = 10) -> np.ndarray:
    """Joint feature sequence for an ordered pair (reference, query).
    A None reference stands for the virtual root."""
    traces = (list(sym_i.traces) if sym_i is not None else []) + list(sym_j.traces)
    flags = ([0.0] * len(sym_i.traces) if sym_i is not None else []) + [1.0] * len(sym_j.traces)
    seqs, _ = normalize_window(traces, m=m)

    if sym_i is not None:
        xi0, yi0, xi1, yi1 = sym_i.bbox()
        xj0, yj0, xj1, yj1 = sym_j.bbox()
        wi, hi = max(xi1 - xi0, 1e-9), max(yi1 - yi0, 1e-9)
        wj, hj = max(xj1 - xj0, 1e-9), max(yj1 - yj0, 1e-9)
        ref = max(wi, hi)
        geo = np.array([
            0.0,
            ((xj0 + xj1) / 2 - (xi0 + xi1) / 2) / ref,
            ((yj0 + yj1) / 2 - (yi0 + yi1) / 2) / ref,
            np.log(wj / wi),
            np.log(hj / hi),
        ])
        summaries = np.concatenate([sym_i.summary(), sym_j.summary()])
    else:
        # Root query: the reference is the whole expression, so position
        # within the expression box is what identifies the start symbol.
        xj0, yj0, xj1, yj1 = sym_j.bbox()
        if sym_j.expr_bbox is not None:
            ex0, ey0, ex1, ey1 = sym_j.expr_bbox
        else:
            ex0, ey0, ex1, ey1 = xj0, yj0, xj1, yj1
        ref = max(ex1 - ex0, ey1 - ey0, 1e-9)
        geo = np.array([
            1.0,
            ((xj0 + xj1) / 2 - (ex0 + ex1) / 2) / ref,
            ((yj0 + yj1) / 2 - (ey0 + ey1) / 2) / ref,
            np.log(max(xj1 - xj0, 1e-9) / ref),
            np.log(max(yj1 - yj0, 1e-9) / ref),
        ])
        summaries = np.concatenate([np.zeros(TOPK + 2 * len(STRUCT_CATEGORIES)),
                                    sym_j.summary()])
    glob = np.concatenate([geo, summaries])

    rows = []
    for seq, flag in zip(seqs, flags):
        for p, (x, y) in enumerate(seq):
            penup = 1.0 if p == len(seq) - 1 else 0.0
            rows.append(np.concatenate([[x, y, flag, penup], glob]))
    return np.array(rows)


class RelNet(Module):
    """2-layer BiLSTM (hidden 64), dropout, 8-head attention over the
    128-dim states, mean pooling, then dense 128 -> layer norm -> leaky
    ReLU -> dense to relation log-probabilities."""

    ARCH = "relnet"

    def __init__(self, hidden: int = 64, layers: int = 2, heads: int = 8,
                 m: int = 10, dropout: float = 0.4, use_attention: bool = True, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.hidden, self.layers_n, self.heads, self.m = hidden, layers, heads, m
        self.dropout_rate = dropout
        self.use_attention = use_attention
        in_dim = PAIR_POINT_DIM + GLOBAL_DIM
        self.lstm = StackedBiLSTM(in_dim, hidden, layers, rng)
        self.drop = Dropout(dropout, np.random.default_rng(rng.integers(2 ** 31)))
        self.attn = MultiHeadSelfAttention(2 * hidden, heads, rng)
        self.fc1 = Dense(2 * hidden, 2 * hidden, rng)
        self.ln = LayerNorm(2 * hidden)
        self.act = LeakyReLU(0.01)
        self.fc2 = Dense(2 * hidden, N_REL_CLASSES, rng)

    def params(self):
        out = prefixed("lstm", self.lstm.params())
        if self.use_attention:
            out += prefixed("attn", self.attn.params())
        out += prefixed("fc1", self.fc1.params())
        out += prefixed("ln", self.ln.params())
        out += prefixed("fc2", self.fc2.params())
        return out

    def forward(self, seq, train=False):
        h = self.lstm.forward(seq, train=train)
        h = self.drop.forward(h, train=train)
        if self.use_attention:
            h = self.attn.forward(h, train=train)
        if train:
            self._t = h.shape[0]
        pooled = h.mean(axis=0, keepdims=True)
        z = self.fc2.forward(
            self.act.forward(
                self.ln.forward(self.fc1.forward(pooled, train=train), train=train),
                train=train),
            train=train)[0]
        logp = log_softmax(z)
        if train:
            self._logp = logp
        return logp

    def backward(self, dlogp):
        # through log-softmax: dz = dlogp - softmax * sum(dlogp)
        p = np.exp(self._logp)
        dz = dlogp - p * dlogp.sum()
        dpooled = self.fc1.backward(
            self.ln.backward(self.act.backward(self.fc2.backward(dz[None, :]))))
        dh = np.repeat(dpooled / self._t, self._t, axis=0)
        if self.use_attention:
            dh = self.attn.backward(dh)
        dh = self.drop.backward(dh)
        return self.lstm.backward(dh)

    def to_bundle(self) -> ModelBundle:
        meta = {"hidden": self.hidden, "layers": self.layers_n, "heads": self.heads,
                "m": self.m, "dropout": self.dropout_rate, "use_attention": self.use_attention}
        return ModelBundle(arch=self.ARCH, meta=meta, arrays=params_to_arrays(self.params()))

    @classmethod
    def from_bundle(cls, bundle: ModelBundle) -> "RelNet":
        net = cls(**bundle.meta, rng=np.random.default_rng(0))
        load_params(net.params(), bundle.arrays)
        return net


def score_relations(symbols: list[SymbolFeature], net: RelNet) -> PairScores:
    """Log-probability vectors for every forward pair plus per-node
    line_start scores (scored against a zeroed virtual-root reference)."""
    if not symbols:
        raise DataError("no symbols to relate")
    pairs = {}
    ls = np.zeros(len(symbols))
    for j, sym_j in enumerate(symbols):
        logp = net.forward(pair_sequence(None, sym_j, m=net.m), train=False)
        ls[j] = logp[RELATION_CLASSES.index(LINE_START)]
        for i in range(j):
            pairs[(i, j)] = net.forward(pair_sequence(symbols[i], sym_j, m=net.m), train=False)
    return PairScores(n=len(symbols), pairs=pairs, line_start=ls)


def decode_tree(scores: PairScores) -> list[Edge]:
    """Maximum-score edge assignment under the one-max constraints.

    Forward-only pair edges make node 0 the unique feasible root, so the
    line_start edge is pinned there. Every other node needs exactly one
    incoming (source, relation) slot and each slot has capacity one, which
    is a bipartite assignment problem; it is solved exactly. A feasible
    assignment always exists (the plain right-edge chain), so decoding is
    total for arbitrary finite scores.
    """
    n = scores.n
    edges = [Edge(src=ROOT, dst=0, label=LINE_START)]
    if n <= 1:
        return edges

    slots = [(i, rel) for i in range(n - 1) for rel in PAIR_RELATIONS]
    slot_index = {s: k for k, s in enumerate(slots)}
    forbidden = -1e15
    cost = np.full((n - 1, len(slots)), forbidden)
    for j in range(1, n):
        for i in range(j):
            vec = scores.pairs[(i, j)]
            for rel in PAIR_RELATIONS:
                cost[j - 1, slot_index[(i, rel)]] = float(
                    vec[RELATION_CLASSES.index(rel)])

    rows, cols = linear_sum_assignment(cost, maximize=True)
    for r, c in zip(rows, cols):
        if cost[r, c] <= forbidden / 2:
            raise RuntimeError("assignment chose an infeasible slot")  # unreachable
        i, rel = slots[c]
        edges.append(Edge(src=i, dst=r + 1, label=rel))
    edges[1:] = sorted(edges[1:], key=lambda e: e.dst)
    return edges


def tree_score(scores: PairScores, edges) -> float:
    """Summed log-probability of a decoded edge set (excluding the pinned
    line_start edge)."""
    total = 0.0
    for e in edges:
        if e.label == LINE_START:
            continue
        total += float(scores.pairs[(e.src, e.dst)][RELATION_CLASSES.index(e.label)])
    return total


def exhaustive_best_tree(scores: PairScores):
    """Exact optimum over all constraint-satisfying assignments, by
    branch-and-bound over nodes. Practical for small n; decoding oracle."""
    n = scores.n
    if n <= 1:
        return [Edge(src=ROOT, dst=0, label=LINE_START)], 0.0

    options = {}
    for j in range(1, n):
        opts = []
        for i in range(j):
            vec = scores.pairs[(i, j)]
            for rel in PAIR_RELATIONS:
                opts.append((float(vec[RELATION_CLASSES.index(rel)]), i, rel))
        opts.sort(key=lambda t: (-t[0], t[1], t[2]))
        options[j] = opts
    # optimistic remaining-score bound, ignoring slot conflicts
    suffix = {n: 0.0}
    for j in range(n - 1, 0, -1):
        suffix[j] = suffix[j + 1] + options[j][0][0]

    best_edges: list | None = None
    best_score = -np.inf

    def recurse(j, used, acc, picked):
        nonlocal best_edges, best_score
        if j == n:
            if acc > best_score:
                best_score = acc
                best_edges = list(picked)
            return
        if acc + suffix[j] <= best_score:
            return
        for score, i, rel in options[j]:
            slot = (i, rel)
            if slot in used:
                continue
            if acc + score + suffix.get(j + 1, 0.0) <= best_score:
                break  # options are sorted; nothing below can win
            used.add(slot)
            picked.append(Edge(src=i, dst=j, label=rel))
            recurse(j + 1, used, acc + score, picked)
            picked.pop()
            used.remove(slot)

    recurse(1, set(), 0.0, [])
    return [Edge(src=ROOT, dst=0, label=LINE_START)] + best_edges, best_score


def revise_relations(symbols: list[SymbolFeature], net: RelNet) -> list[Edge]:
    """Stage-5 pass: identical scoring and decoding, consuming corrected
    class distributions carried by the symbol features."""
    return decode_tree(score_relations(symbols, net))


@dataclass
class RelTrainConfig:
    hidden: int = 16
    layers: int = 2
    heads: int = 4
    m: int = 8
    dropout: float = 0.0
    lr: float = 8e-3
    lr_min: float = 3e-4
    epochs: int = 150
    batch_size: int = 8
    seed: int = 0
    clip_norm: float = 5.0
    weight_decay: float = 0.0
    # extra training copies with softened class distributions, so decode
    # margins survive the soft probabilities seen after correction
    class_noise_copies: int = 2
    class_noise_alpha: float = 0.3
    target_accuracy: float = 1.0
    # decoding tolerates argmax misses on individual pairs, so the decode
    # criterion is the binding one; the pair criterion may be softer
    target_pair_accuracy: float | None = None


def pair_training_set(symbol_lists, graphs):
    """(sequence, class index) samples for every forward pair and every
    per-node root query of each annotated expression."""
    samples = []
    for symbols, graph in zip(symbol_lists, graphs):
        rel_of = {}
        root = graph.root_id()
        for e in graph.edges:
            if e.label != LINE_START:
                rel_of[(e.src, e.dst)] = e.label
        for j in range(len(symbols)):
            label = LINE_START if j == root else NONE
            samples.append((None, j, symbols, RELATION_CLASSES.index(label)))
            for i in range(j):
                rel = rel_of.get((i, j), NONE)
                samples.append((i, j, symbols, RELATION_CLASSES.index(rel)))
    return samples


def _soften_class_probs(symbol_lists, rng, alpha_max: float):
    """Copies of the symbol features with class distributions blended
    toward random noise, mimicking soft post-correction probabilities."""
    out = []
    for symbols in symbol_lists:
        noisy = []
        for s in symbols:
            p = np.asarray(s.class_probs, dtype=float)
            alpha = rng.uniform(0.0, alpha_max)
            q = (1.0 - alpha) * p + alpha * rng.dirichlet(np.ones(p.shape[0]))
            noisy.append(replace(s, class_probs=q / q.sum()))
        out.append(noisy)
    return out


def train_relator(symbol_lists, graphs, config: RelTrainConfig = RelTrainConfig()) -> RelNet:
    """Overfit-capable trainer; graphs must be indexed like symbol_lists,
    with node ids equal to symbol positions (reading order)."""
    if not symbol_lists:
        raise DataError("empty relation dataset")
    rng = np.random.default_rng(config.seed)
    net = RelNet(hidden=config.hidden, layers=config.layers, heads=config.heads,
                 m=config.m, dropout=config.dropout, rng=rng)
    opt = AdamW(net.params(), lr=config.lr, weight_decay=config.weight_decay,
                clip_norm=config.clip_norm)

    train_lists = list(symbol_lists)
    train_graphs = list(graphs)
    for _ in range(config.class_noise_copies):
        train_lists.extend(_soften_class_probs(symbol_lists, rng, config.class_noise_alpha))
        train_graphs.extend(graphs)
    samples = pair_training_set(train_lists, train_graphs)

    seqs = []
    for i, j, symbols, target in samples:
        ref = symbols[i] if i is not None else None
        seqs.append((pair_sequence(ref, symbols[j], m=config.m), target))
    clean = pair_training_set(symbol_lists, graphs)
    clean_seqs = [(pair_sequence(symbols[i] if i is not None else None,
                                 symbols[j], m=config.m), t)
                  for i, j, symbols, t in clean]

    for epoch in range(config.epochs):
        lr = cosine_lr(epoch, config.epochs, config.lr, config.lr_min)
        order = rng.permutation(len(seqs))
        for b0 in range(0, len(order), config.batch_size):
            batch = order[b0:b0 + config.batch_size]
            opt.zero_grad()
            for idx in batch:
                seq, target = seqs[idx]
                net.forward(seq, train=True)
                dlogp = np.zeros(N_REL_CLASSES)
                dlogp[target] = -1.0 / len(batch)  # mean NLL over the batch
                net.backward(dlogp)
            opt.step(lr=lr)
        # argmax-correct pairs alone are not sufficient: decoding maximizes
        # the joint score, so stop only once the decoded trees reproduce
        # the training graphs (clean and noised features alike).
        pair_target = (config.target_pair_accuracy
                       if config.target_pair_accuracy is not None
                       else config.target_accuracy)
        if pair_accuracy(net, clean_seqs) >= pair_target and \
                decode_accuracy(net, train_lists, train_graphs) >= config.target_accuracy:
            break
    return net


def decode_accuracy(net: RelNet, symbol_lists, graphs) -> float:
    good = 0
    for symbols, graph in zip(symbol_lists, graphs):
        edges = decode_tree(score_relations(symbols, net))
        want = {(e.src, e.dst, e.label) for e in graph.edges}
        got = {(e.src, e.dst, e.label) for e in edges}
        good += int(want == got)
    return good / len(graphs) if graphs else 1.0


def pair_accuracy(net: RelNet, seqs) -> float:
    good = 0
    for seq, target in seqs:
        logp = net.forward(seq, train=False)
        if int(np.argmax(logp)) == target:
            good += 1
    return good / len(seqs) if seqs else 1.0
