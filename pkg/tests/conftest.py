"""Shared fixtures: the canonical multi-symbol fixture, a deterministic
fixture corpus for round trips, and session-scoped toy models trained on
a 20-expression synthetic corpus (reused by pipeline, CLI, service, and
acceptance tests)."""
import time

import numpy as np
import pytest

from inkmath.annotator import AnnotTrainConfig, train_annotator
from inkmath.classifier import ClassifierTrainConfig, train_classifier
from inkmath.corrector import CorrectorTrainConfig, order_symbols, symbol_step_features, train_corrector
from inkmath.ink import bbox_of
from inkmath.pipeline import (
    NetStages,
    Pipeline,
    classification_inputs,
    ground_truth_reading_order,
    remap_to_reading_order,
)
from inkmath.relator import RelTrainConfig, SymbolFeature, train_relator
from inkmath.segmenter import SegTrainConfig, train_segmenter
from inkmath.symbols import SymbolInventory
from inkmath.synth import compose, fig_style_fixture

# Inventory and layouts of the end-to-end toy corpus. Deterministic: no
# jitter, so trained models face exactly these inputs again.
TOY_LABELS = ["0", "1", "2", "a", "b", "x", "y", "+", "-", "=", "(", ")"]
TOY_LATEXES = [
    "a+b", "x=1", "2x", "a_{2}", "b^{2}", "x_{1}", "y^{a}", "1+2=x",
    "\\frac{a}{2}", "\\frac{1}{x}", "a=(b)", "(x)", "x+y=a", "2+a",
    "b-1", "a^{x}", "y_{b}", "\\frac{x}{y}", "2=2", "x+a_{1}",
]

FIXTURE_LATEXES = [
    "A_{2}>B_{2}", "x", "\\frac{1}{2}", "\\sum_{n}^{7}x", "a+b=c",
    "x^{2}", "b_{0}", "\\frac{a+b}{2}", "(x+y)", "\\int x",
    "x^{2}+y^{2}=1", "\\frac{x}{y}", "a_{1}+a_{2}", "\\pi x", "2<x",
    "\\alpha^{2}", "x_{a}^{b}", "\\frac{1}{x+1}", "y=x+1", "b^{x+1}",
    "\\sum_{a}x", "7+2=9", "(a)_{2}", "\\frac{\\alpha}{2}", "x+\\frac{1}{2}",
    "c^{2}=a^{2}+b^{2}", "\\lim x", "x\\rightarrow0", "a\\times b", "t_{0}",
    "x=\\frac{a}{b}", "9x^{2}",
]


@pytest.fixture(scope="session")
def fig_fixture():
    return fig_style_fixture()


@pytest.fixture(scope="session")
def fixture_corpus():
    """At least 30 deterministic (expression, slg) pairs covering the
    supported grammar."""
    rng = np.random.default_rng(7)
    pairs = []
    for i, latex in enumerate(FIXTURE_LATEXES):
        pairs.append(compose(latex, source_id=f"fx{i:03d}", rng=rng, jitter=0.002))
    return pairs


def build_toy_corpus():
    pairs = []
    for i, latex in enumerate(TOY_LATEXES):
        pairs.append(compose(latex, source_id=f"toy{i:03d}"))
    return pairs


def train_toy_models(corpus, inventory):
    """Train all five networks on the toy corpus. Returns (nets, timings)."""
    timings = {}

    t0 = time.time()
    seg_cfg = SegTrainConfig(hidden=32, layers=2, heads=4, m=10, epochs=150,
                             lr=5e-3, seed=1)
    segnet = train_segmenter(corpus, seg_cfg)
    timings["segmenter"] = time.time() - t0

    cls_cfg = ClassifierTrainConfig(hidden=20, lstm_layers=2, conv_channels=(6, 12),
                                    image_size=28, m=12, fusion=(48, 32),
                                    dropout=0.1, lr=3e-3, epochs=40, seed=1)
    t0 = time.time()
    cls_dataset = []
    for expr, slg in corpus:
        nodes = ground_truth_reading_order(expr, slg)
        groups = [set(n.trace_ids) for n in nodes]
        labels = [n.label for n in nodes]
        for i in range(len(groups)):
            feats = classification_inputs(expr, groups, i, labels,
                                          m=cls_cfg.m, image_size=cls_cfg.image_size)
            cls_dataset.append((feats, labels[i]))
    dualnet = train_classifier(cls_dataset, inventory, cls_cfg)
    timings["classifier"] = time.time() - t0

    t0 = time.time()
    rel_cfg = RelTrainConfig(hidden=16, layers=2, heads=4, m=8, epochs=150, lr=8e-3,
                             seed=1, target_pair_accuracy=0.99)
    sym_lists, graphs = [], []
    for expr, slg in corpus:
        ebox = bbox_of(expr.traces)
        remapped = remap_to_reading_order(expr, slg)
        feats = []
        for node in sorted(remapped.nodes, key=lambda n: n.id):
            traces = [expr.trace_by_id(t) for t in sorted(node.trace_ids)]
            dist = np.zeros(len(inventory))
            dist[inventory.index(node.label)] = 1.0
            feats.append(SymbolFeature(traces=traces, class_probs=dist,
                                       mask=np.zeros(9), inventory=inventory,
                                       expr_bbox=ebox))
        sym_lists.append(feats)
        graphs.append(remapped)
    relnet = train_relator(sym_lists, graphs, rel_cfg)
    timings["relator"] = time.time() - t0

    t0 = time.time()
    corr_cfg = CorrectorTrainConfig(d_model=32, layers=2, heads=4, seed=1,
                                    epochs_augmented=30, epochs_clean=10)
    corr_dataset = []
    for expr, slg in corpus:
        ebox = bbox_of(expr.traces)
        incoming = {e.dst: e.label for e in slg.edges}
        feats, targets = [], []
        for nid in order_symbols(slg):
            node = slg.node(nid)
            box = bbox_of([expr.trace_by_id(t) for t in node.trace_ids])
            dist = np.full(len(inventory), 1e-3)
            dist[inventory.index(node.label)] = 1.0
            dist /= dist.sum()
            feats.append(symbol_step_features(dist, box, ebox, incoming[nid]))
            targets.append(inventory.index(node.label))
        corr_dataset.append((np.array(feats), targets))
    corrnet = train_corrector(corr_dataset, len(inventory), corr_cfg)
    timings["corrector"] = time.time() - t0

    t0 = time.time()
    ann_cfg = AnnotTrainConfig(hidden=24, layers=2, m=10, epochs=60, seed=1)
    annotnet = train_annotator(corpus, inventory, ann_cfg)
    timings["annotator"] = time.time() - t0

    return {"segmenter": segnet, "classifier": dualnet, "relator": relnet,
            "corrector": corrnet, "annotator": annotnet}, timings


@pytest.fixture(scope="session")
def toy_setup():
    """Toy corpus, inventory, trained nets, and a ready pipeline."""
    inventory = SymbolInventory(TOY_LABELS)
    corpus = build_toy_corpus()
    nets, timings = train_toy_models(corpus, inventory)
    stages = NetStages(nets["segmenter"], nets["classifier"], nets["relator"],
                       nets["corrector"], inventory)
    pipeline = Pipeline(stages, inventory, enable_correction=True, version_tag="toy")
    return {"inventory": inventory, "corpus": corpus, "nets": nets,
            "timings": timings, "pipeline": pipeline}
