"""Five-stage recognition: segment, classify, relate, correct, re-relate.

Stages are pluggable so ground-truth oracles can stand in for any network;
the orchestration, SLG assembly, and output generation stay identical.
"""
from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classifier import DualNet, classify, featurize_symbol
from .corrector import CorrNet, correct, order_symbols, symbol_step_features
from .errors import CapacityError, InkError, StageError
from .evalkit import MetricsReport, aggregate, compare_slg
from .ink import Expression, bbox_of
from .inkml import parse_inkml
from .latex import slg_to_latex
from .lg import write_lg
from .mathml import slg_to_mathml
from .nn import load_model
from .relator import RelNet, SymbolFeature, decode_tree, score_relations
from .segmenter import SegNet, segment_expression
from .slg import LINE_START, ROOT, Edge, StrokeLabelGraph, SymbolNode
from .symbols import SymbolInventory, struct_mask

MODEL_DIR_ENV = "HMER_MODEL_DIR"


@dataclass
class PipelineConfig:
    """Model locations and stage switches. Paths resolve against
    model_dir, which defaults to $HMER_MODEL_DIR."""

    model_dir: str = ""
    segmenter: str = "segmenter.imnn"
    classifier: str = "classifier.imnn"
    relator: str = "relator.imnn"
    corrector: str = "corrector.imnn"
    annotator: str = "annotator.imnn"
    inventory: str = ""  # empty: packaged 101-class default
    enable_correction: bool = True
    seg_threshold: float = 0.5
    version_tag: str = "dev"

    def resolve(self, name: str) -> Path:
        base = self.model_dir or os.environ.get(MODEL_DIR_ENV, ".")
        p = Path(name)
        return p if p.is_absolute() else Path(base) / p

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise InkError(f"pipeline config not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InkError(f"pipeline config is not valid JSON: {exc}") from exc
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise InkError(f"pipeline config has unknown fields: {exc}") from exc
        for stage in ("segmenter", "classifier", "relator", "corrector"):
            f = cfg.resolve(getattr(cfg, stage))
            if not f.exists():
                raise InkError(f"configured {stage} model missing: {f}")
        return cfg


@dataclass
class RecognitionResult:
    slg: StrokeLabelGraph
    latex: str
    mathml: str
    timings_ms: dict
    symbols: list  # dicts: id, label, score, trace_ids
    correction_applied: bool
    correction_fallback: bool = False
    distributions: list | None = None  # final per-symbol class distributions

    def lg_text(self) -> str:
        return write_lg(self.slg)


def reading_order(groups, expr: Expression):
    """Sort trace-id groups into left-to-right reading order: ascending
    min-x, ties to the higher symbol, then to the earlier-written trace."""
    def key(group):
        pts = np.vstack([expr.trace_by_id(t).points for t in group])
        return (float(pts[:, 0].min()), -float(pts[:, 1].mean()), min(group))
    return sorted((set(g) for g in groups), key=key)


def _group_centers(expr: Expression, ordered_groups):
    return [np.vstack([expr.trace_by_id(t).points for t in g]).mean(axis=0)
            for g in ordered_groups]


def ground_truth_reading_order(expr: Expression, slg: StrokeLabelGraph):
    """Reference nodes sorted by the pipeline's own reading order.
    Training data built through this matches inference exactly."""
    groups = [set(n.trace_ids) for n in slg.nodes]
    ordered = reading_order(groups, expr)
    by_traces = {n.trace_ids: n for n in slg.nodes}
    return [by_traces[frozenset(g)] for g in ordered]


def remap_to_reading_order(expr: Expression, slg: StrokeLabelGraph) -> StrokeLabelGraph:
    """Renumber nodes so ids equal reading-order positions (what the
    pipeline assembles); edges are remapped accordingly."""
    nodes_in_order = ground_truth_reading_order(expr, slg)
    pos = {n.id: k for k, n in enumerate(nodes_in_order)}
    new_nodes = tuple(SymbolNode(id=k, trace_ids=n.trace_ids, label=n.label, score=n.score)
                      for k, n in enumerate(nodes_in_order))
    new_edges = tuple(Edge(src=ROOT if e.src == ROOT else pos[e.src],
                           dst=pos[e.dst], label=e.label) for e in slg.edges)
    return StrokeLabelGraph(nodes=new_nodes, edges=new_edges)


def classification_inputs(expr: Expression, ordered_groups, index: int,
                          known_labels, m: int, image_size: int, n_context: int = 2):
    """Stage-2 features for one symbol, identical at train and inference.

    Context strokes come from the nearest other groups (pure geometry);
    the structural mask encodes the nearest already-classified symbols,
    i.e. groups earlier in reading order. known_labels needs valid entries
    only for positions before `index`.
    """
    centers = _group_centers(expr, ordered_groups)
    others = sorted((float(np.linalg.norm(centers[index] - centers[j])), j)
                    for j in range(len(ordered_groups)) if j != index)
    ctx_idx = [j for _, j in others[:n_context]]
    prev = [(d, j) for d, j in others if j < index]
    mask_labels = [known_labels[j] for _, j in prev[:n_context]
                   if known_labels[j] is not None]

    own = [expr.trace_by_id(t) for t in sorted(ordered_groups[index])]
    ctx = [expr.trace_by_id(t) for j in ctx_idx for t in sorted(ordered_groups[j])]
    mask = np.array(struct_mask(mask_labels), dtype=float)
    return featurize_symbol(own, ctx, mask, m=m, image_size=image_size)


class NetStages:
    """Production stages backed by the four trained networks."""

    def __init__(self, segnet: SegNet, dualnet: DualNet, relnet: RelNet,
                 corrnet: CorrNet | None, inventory: SymbolInventory,
                 seg_threshold: float = 0.5, n_context: int = 2):
        self.segnet = segnet
        self.dualnet = dualnet
        self.relnet = relnet
        self.corrnet = corrnet
        self.inventory = inventory
        self.seg_threshold = seg_threshold
        self.n_context = n_context

    def segment(self, expr: Expression):
        return segment_expression(expr.traces, self.segnet, threshold=self.seg_threshold)

    def classify(self, expr: Expression, ordered_groups):
        labels: list[str | None] = [None] * len(ordered_groups)
        dists = []
        for i in range(len(ordered_groups)):
            feats = classification_inputs(expr, ordered_groups, i, labels,
                                          m=self.dualnet.m,
                                          image_size=self.dualnet.image_size,
                                          n_context=self.n_context)
            probs = classify(feats, self.dualnet)
            labels[i] = self.inventory.label(int(np.argmax(probs)))
            dists.append(probs)
        return dists

    def relate(self, features):
        return decode_tree(score_relations(features, self.relnet))

    def correct(self, step_feats):
        if self.corrnet is None:
            raise CapacityError("no corrector model loaded")
        return correct(step_feats, self.corrnet)


class OracleStages:
    """Ground-truth stand-ins for every stage; resolver(expr) must return
    the reference SLG."""

    def __init__(self, resolver, inventory: SymbolInventory):
        self.resolver = resolver
        self.inventory = inventory

    def segment(self, expr: Expression):
        ref = self.resolver(expr)
        return [set(n.trace_ids) for n in ref.nodes]

    def classify(self, expr: Expression, ordered_groups):
        ref = self.resolver(expr)
        by_traces = {n.trace_ids: n for n in ref.nodes}
        dists = []
        for group in ordered_groups:
            dist = np.zeros(len(self.inventory))
            node = by_traces.get(frozenset(group))
            if node is not None and node.label in self.inventory:
                dist[self.inventory.index(node.label)] = 1.0
            else:
                dist[:] = 1.0 / len(self.inventory)
            dists.append(dist)
        self._expr = expr
        self._ordered = list(ordered_groups)
        return dists

    def relate(self, features):
        ref = self.resolver(self._expr)
        pos_by_traces = {frozenset(f_traces): i for i, f_traces in
                         enumerate(frozenset(t.id for t in f.traces) for f in features)}
        ref_pos = {n.id: pos_by_traces[n.trace_ids] for n in ref.nodes}
        edges = []
        for e in ref.edges:
            src = ROOT if e.src == ROOT else ref_pos[e.src]
            edges.append(Edge(src=src, dst=ref_pos[e.dst], label=e.label))
        return edges

    def correct(self, step_feats):
        # identity correction: distributions pass through unchanged
        n_classes = len(self.inventory)
        return np.asarray(step_feats, dtype=float)[:, :n_classes]


class Pipeline:
    def __init__(self, stages, inventory: SymbolInventory, enable_correction: bool = True,
                 version_tag: str = "dev"):
        self.stages = stages
        self.inventory = inventory
        self.enable_correction = enable_correction
        self.version_tag = version_tag

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "Pipeline":
        inventory = (SymbolInventory.from_file(config.resolve(config.inventory))
                     if config.inventory else SymbolInventory.default())
        segnet = SegNet.from_bundle(load_model(config.resolve(config.segmenter)))
        dualnet = DualNet.from_bundle(load_model(config.resolve(config.classifier)))
        relnet = RelNet.from_bundle(load_model(config.resolve(config.relator)))
        corrnet = None
        corr_path = config.resolve(config.corrector)
        if config.enable_correction and corr_path.exists():
            corrnet = CorrNet.from_bundle(load_model(corr_path))
        stages = NetStages(segnet, dualnet, relnet, corrnet, inventory,
                           seg_threshold=config.seg_threshold)
        return cls(stages, inventory, enable_correction=config.enable_correction,
                   version_tag=config.version_tag)

    def recognize(self, expr: Expression) -> RecognitionResult:
        """Run stages 1..5 and assemble SLG, LaTeX and MathML. A failing
        stage raises StageError naming the stage, with the artifacts
        produced so far attached."""
        if len(expr.traces) == 0:
            raise InkError("expression has no traces")
        timings = {}
        partial = {}
        ebox = bbox_of(expr.traces)

        t0 = time.perf_counter()
        try:
            raw_groups = self.stages.segment(expr)
        except Exception as exc:
            raise StageError("segment", exc, partial) from exc
        timings["segment"] = (time.perf_counter() - t0) * 1000.0
        partial["groups"] = raw_groups

        ordered = reading_order(raw_groups, expr)

        t0 = time.perf_counter()
        try:
            dists = self.stages.classify(expr, ordered)
        except Exception as exc:
            raise StageError("classify", exc, partial) from exc
        timings["classify"] = (time.perf_counter() - t0) * 1000.0
        partial["class_distributions"] = dists

        def features_from(dist_list):
            feats = []
            for group, dist in zip(ordered, dist_list):
                traces = [expr.trace_by_id(t) for t in sorted(group)]
                top = self.inventory.label(int(np.argmax(dist)))
                feats.append(SymbolFeature(traces=traces, class_probs=np.asarray(dist),
                                           mask=np.zeros(9), inventory=self.inventory,
                                           expr_bbox=ebox))
            return feats

        t0 = time.perf_counter()
        try:
            feats = features_from(dists)
            edges = self.stages.relate(feats)
        except Exception as exc:
            raise StageError("relate", exc, partial) from exc
        timings["relate"] = (time.perf_counter() - t0) * 1000.0

        def assemble(dist_list, edge_list) -> StrokeLabelGraph:
            nodes = []
            for idx, (group, dist) in enumerate(zip(ordered, dist_list)):
                label = self.inventory.label(int(np.argmax(dist)))
                score = float(np.max(dist))
                nodes.append(SymbolNode(id=idx, trace_ids=frozenset(group),
                                        label=label, score=min(max(score, 0.0), 1.0)))
            return StrokeLabelGraph(nodes=tuple(nodes), edges=tuple(edge_list))

        slg = assemble(dists, edges)
        partial["stage3_slg"] = slg
        correction_applied = False
        fallback = False

        if self.enable_correction:
            t0 = time.perf_counter()
            try:
                order_ids = order_symbols(slg)
                incoming = {e.dst: e.label for e in slg.edges}
                step_feats = []
                for nid in order_ids:
                    group = ordered[nid]
                    box = bbox_of([expr.trace_by_id(t) for t in group])
                    step_feats.append(symbol_step_features(dists[nid], box, ebox, incoming[nid]))
                try:
                    corrected_seq = self.stages.correct(np.array(step_feats))
                    corrected = list(dists)
                    for pos, nid in enumerate(order_ids):
                        corrected[nid] = corrected_seq[pos]
                    correction_applied = True
                except CapacityError:
                    corrected = dists
                    fallback = True
            except Exception as exc:
                raise StageError("correct", exc, partial) from exc
            timings["correct"] = (time.perf_counter() - t0) * 1000.0

            if correction_applied:
                t0 = time.perf_counter()
                try:
                    feats2 = features_from(corrected)
                    edges2 = self.stages.relate(feats2)
                    slg = assemble(corrected, edges2)
                except Exception as exc:
                    raise StageError("re-relate", exc, partial) from exc
                timings["re-relate"] = (time.perf_counter() - t0) * 1000.0

        t0 = time.perf_counter()
        try:
            latex = slg_to_latex(slg)
            mathml = slg_to_mathml(slg)
        except Exception as exc:
            partial["slg"] = slg
            raise StageError("serialize", exc, partial) from exc
        timings["serialize"] = (time.perf_counter() - t0) * 1000.0

        final_dists = corrected if (self.enable_correction and correction_applied) else dists
        symbols = [{"id": n.id, "label": n.label, "score": n.score,
                    "trace_ids": sorted(n.trace_ids)} for n in slg.nodes]
        return RecognitionResult(slg=slg, latex=latex, mathml=mathml,
                                 timings_ms=timings, symbols=symbols,
                                 correction_applied=correction_applied,
                                 correction_fallback=fallback,
                                 distributions=[list(map(float, d)) for d in final_dists])


def recognize_batch(input_dir, pipeline: Pipeline, output_dir=None,
                    max_workers: int = 4):
    """Recognize every .inkml file in a directory. Returns (results,
    MetricsReport-or-None); the report is present when every input carries
    ground truth. Output files: <stem>.lg and <stem>.tex per input."""
    input_dir = Path(input_dir)
    paths = sorted(input_dir.glob("*.inkml"))
    parsed = [parse_inkml(p) for p in paths]

    def run(item):
        expr, _gt = item
        return pipeline.recognize(expr)

    if max_workers > 1 and len(parsed) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(run, parsed))
    else:
        results = [run(item) for item in parsed]

    if output_dir is not None:
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        for path, res in zip(paths, results):
            (output_dir / (path.stem + ".lg")).write_text(res.lg_text(), encoding="utf-8")
            (output_dir / (path.stem + ".tex")).write_text(res.latex + "\n", encoding="utf-8")

    tallies = []
    have_gt = parsed and all(gt is not None for _, gt in parsed)
    if have_gt:
        for (expr, gt), res in zip(parsed, results):
            tallies.append(compare_slg(res.slg, gt))
        return results, aggregate(tallies)
    return results, None
