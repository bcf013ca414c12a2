"""Command-line interface: recognition, per-stage debugging, training,
annotation, evaluation, and the HTTP service."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .annotator import (
    AnnotNet,
    AnnotTrainConfig,
    annotate_corpus,
    crosscheck_crohme,
    crosscheck_mathwriting,
    train_annotator,
)
from .classifier import ClassifierTrainConfig, DualNet, classify, featurize_symbol, top_k, train_classifier
from .corrector import CorrectorTrainConfig, symbol_step_features, train_corrector
from .errors import InkError
from .evalkit import aggregate, compare_slg
from .ink import bbox_of
from .inkml import parse_inkml
from .lg import parse_lg, write_lg
from .nn import load_model, save_model
from .pipeline import MODEL_DIR_ENV, Pipeline, PipelineConfig, recognize_batch
from .relator import RelTrainConfig, SymbolFeature, train_relator
from .segmenter import SegNet, SegTrainConfig, segment_expression, train_segmenter
from .service import create_server
from .symbols import SymbolInventory, struct_mask


def _load_inventory(path: str | None) -> SymbolInventory:
    return SymbolInventory.from_file(path) if path else SymbolInventory.default()


def _load_corpus(directory) -> list:
    """(expression, slg) pairs from every annotated .inkml file."""
    pairs = []
    for path in sorted(Path(directory).glob("*.inkml")):
        expr, slg = parse_inkml(path)
        if slg is not None:
            pairs.append((expr, slg))
    if not pairs:
        raise InkError(f"no annotated .inkml files under {directory}")
    return pairs


def cmd_recognize(args) -> int:
    pipeline = Pipeline.from_config(PipelineConfig.from_json(args.config))
    for path in args.inputs:
        expr, _ = parse_inkml(path)
        result = pipeline.recognize(expr)
        sys.stdout.write(result.lg_text())
        sys.stdout.write(f"% LaTeX: {result.latex}\n")
        if args.output_dir:
            out = Path(args.output_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / (Path(path).stem + ".lg")).write_text(result.lg_text(), encoding="utf-8")
            (out / (Path(path).stem + ".tex")).write_text(result.latex + "\n", encoding="utf-8")
    return 0


def cmd_batch(args) -> int:
    pipeline = Pipeline.from_config(PipelineConfig.from_json(args.config))
    results, report = recognize_batch(args.input_dir, pipeline,
                                      output_dir=args.output_dir, max_workers=args.workers)
    print(f"recognized {len(results)} expressions")
    if report is not None:
        print(report.table())
    return 0


def cmd_segment(args) -> int:
    net = SegNet.from_bundle(load_model(args.model))
    for path in args.inputs:
        expr, _ = parse_inkml(path)
        groups = segment_expression(expr.traces, net)
        for k, group in enumerate(groups):
            ids = ", ".join(str(t) for t in sorted(group))
            print(f"O, {k}, _, 1.0, {ids}")
    return 0


def cmd_classify(args) -> int:
    net = DualNet.from_bundle(load_model(args.model))
    inventory = _load_inventory(args.inventory)
    for path in args.inputs:
        expr, slg = parse_inkml(path)
        if slg is None:
            print(f"{path}: no trace groups; segment first", file=sys.stderr)
            return 2
        for node in slg.nodes:
            traces = [expr.trace_by_id(t) for t in sorted(node.trace_ids)]
            feats = featurize_symbol(traces, m=net.m, image_size=net.image_size)
            if args.dump_images:
                from .geometry import write_pgm
                out = Path(args.dump_images)
                out.mkdir(parents=True, exist_ok=True)
                write_pgm(feats[1], out / f"{Path(path).stem}_s{node.id}.pgm")
            probs = classify(feats, net)
            best = int(np.argmax(probs))
            print(f"{node.id}: {inventory.label(best)} ({probs[best]:.3f})")
    return 0


def _staged_pipeline(args, enable_correction: bool) -> Pipeline:
    cfg = PipelineConfig.from_json(args.config)
    cfg.enable_correction = enable_correction
    return Pipeline.from_config(cfg)


def cmd_relate(args) -> int:
    pipeline = _staged_pipeline(args, enable_correction=False)
    for path in args.inputs:
        expr, _ = parse_inkml(path)
        result = pipeline.recognize(expr)
        sys.stdout.write(result.lg_text())
        if args.scores_csv:
            _dump_pair_scores(pipeline, expr, args.scores_csv)
    return 0


def _dump_pair_scores(pipeline, expr, path) -> None:
    """Debug CSV: one row per (src, dst, relation) log-probability."""
    from .pipeline import reading_order
    from .relator import score_relations
    from .slg import RELATION_CLASSES

    stages = pipeline.stages
    groups = stages.segment(expr)
    ordered = reading_order(groups, expr)
    dists = stages.classify(expr, ordered)
    from .ink import bbox_of
    from .relator import SymbolFeature
    ebox = bbox_of(expr.traces)
    feats = [SymbolFeature(traces=[expr.trace_by_id(t) for t in sorted(g)],
                           class_probs=np.asarray(d), mask=np.zeros(9),
                           inventory=pipeline.inventory, expr_bbox=ebox)
             for g, d in zip(ordered, dists)]
    scores = score_relations(feats, stages.relnet)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("src,dst,relation,logprob\n")
        for (i, j), vec in sorted(scores.pairs.items()):
            for k, rel in enumerate(RELATION_CLASSES):
                fh.write(f"{i},{j},{rel},{vec[k]:.6f}\n")
        for j, ls in enumerate(scores.line_start):
            fh.write(f"ROOT,{j},line_start,{ls:.6f}\n")


def cmd_correct(args) -> int:
    pipeline = _staged_pipeline(args, enable_correction=True)
    for path in args.inputs:
        expr, _ = parse_inkml(path)
        result = pipeline.recognize(expr)
        sys.stdout.write(result.lg_text())
        sys.stdout.write(f"% LaTeX: {result.latex}\n")
        if args.json_out:
            payload = {"source": str(path), "latex": result.latex,
                       "symbols": result.symbols,
                       "distributions": result.distributions,
                       "correction_applied": result.correction_applied}
            Path(args.json_out).write_text(json.dumps(payload, indent=2), "utf-8")
    return 0


def cmd_annotate(args) -> int:
    net = AnnotNet.from_bundle(load_model(args.model))
    inventory = _load_inventory(args.inventory)
    rank = None
    if args.classifier:
        dualnet = DualNet.from_bundle(load_model(args.classifier))

        def rank(trace_ids, _expr_holder={}):
            expr = rank.current_expr
            traces = [expr.trace_by_id(t) for t in sorted(trace_ids)]
            feats = featurize_symbol(traces, m=dualnet.m, image_size=dualnet.image_size)
            return top_k(classify(feats, dualnet), inventory, k=len(inventory))

    def checker(slg, expr, gt):
        if rank is not None:
            rank.current_expr = expr
        if args.checker == "none":
            return True, "ok"
        if args.checker == "crohme":
            gt_groups = [n.trace_ids for n in gt.nodes] if gt is not None else None
            if gt_groups is None and rank is None:
                raise InkError("crohme checker without ground truth needs --classifier")
            return crosscheck_crohme(slg, gt_groups, rank)
        if rank is None:
            raise InkError("mathwriting checker needs --classifier")
        return crosscheck_mathwriting(slg, rank)

    report = annotate_corpus(args.input_dir, net, inventory, checker, args.output_dir)
    print(report.summary())
    if args.json:
        Path(args.json).write_text(json.dumps(report.as_dict(), indent=2), encoding="utf-8")
    return 0


def _corpus_symbol_features(pairs, inventory, m, image_size):
    from .pipeline import classification_inputs, ground_truth_reading_order

    dataset = []
    for expr, slg in pairs:
        nodes = ground_truth_reading_order(expr, slg)
        groups = [set(n.trace_ids) for n in nodes]
        labels = [n.label for n in nodes]
        for i in range(len(groups)):
            feats = classification_inputs(expr, groups, i, labels,
                                          m=m, image_size=image_size)
            dataset.append((feats, labels[i]))
    return dataset


def cmd_train(args) -> int:
    pairs = _load_corpus(args.corpus)
    inventory = _load_inventory(args.inventory)
    stage = args.stage
    if stage == "segmenter":
        cfg = SegTrainConfig(seed=args.seed, epochs=args.epochs)
        net = train_segmenter(pairs, cfg)
    elif stage == "classifier":
        cfg = ClassifierTrainConfig(seed=args.seed, epochs=args.epochs)
        dataset = _corpus_symbol_features(pairs, inventory, cfg.m, cfg.image_size)
        net = train_classifier(dataset, inventory, cfg)
    elif stage == "relator":
        from .pipeline import remap_to_reading_order

        cfg = RelTrainConfig(seed=args.seed, epochs=args.epochs)
        sym_lists, graphs = [], []
        for expr, slg in pairs:
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
        net = train_relator(sym_lists, graphs, cfg)
    elif stage == "corrector":
        cfg = CorrectorTrainConfig(seed=args.seed)
        dataset = []
        for expr, slg in pairs:
            ebox = bbox_of(expr.traces)
            from .corrector import order_symbols
            feats, targets = [], []
            incoming = {e.dst: e.label for e in slg.edges}
            for nid in order_symbols(slg):
                node = slg.node(nid)
                box = bbox_of([expr.trace_by_id(t) for t in node.trace_ids])
                dist = np.full(len(inventory), 1e-3)
                dist[inventory.index(node.label)] = 1.0
                dist /= dist.sum()
                feats.append(symbol_step_features(dist, box, ebox, incoming[nid]))
                targets.append(inventory.index(node.label))
            dataset.append((np.array(feats), targets))
        net = train_corrector(dataset, len(inventory), cfg)
    elif stage == "annotator":
        cfg = AnnotTrainConfig(seed=args.seed, epochs=args.epochs)
        net = train_annotator(pairs, inventory, cfg)
    else:
        raise InkError(f"unknown stage {stage!r}")
    save_model(net.to_bundle(), args.out)
    print(f"saved {stage} model to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    hyp_dir, ref_dir = Path(args.hyp_dir), Path(args.ref_dir)
    tallies = []
    for hyp_path in sorted(hyp_dir.glob("*.lg")):
        ref_path = ref_dir / hyp_path.name
        if not ref_path.exists():
            ref_inkml = ref_dir / (hyp_path.stem + ".inkml")
            if ref_inkml.exists():
                _, ref = parse_inkml(ref_inkml)
            else:
                print(f"missing reference for {hyp_path.name}", file=sys.stderr)
                return 2
        else:
            ref = parse_lg(ref_path.read_text(encoding="utf-8"))
        hyp = parse_lg(hyp_path.read_text(encoding="utf-8"))
        tallies.append(compare_slg(hyp, ref))
    report = aggregate(tallies)
    print(report.table())
    if args.json:
        Path(args.json).write_text(json.dumps(report.as_dict(), indent=2), encoding="utf-8")
    return 0


def cmd_serve(args) -> int:
    pipeline = Pipeline.from_config(PipelineConfig.from_json(args.config))
    models = [{"stage": s, "file": getattr(PipelineConfig.from_json(args.config), s)}
              for s in ("segmenter", "classifier", "relator", "corrector")]
    server = create_server(pipeline.recognize, host=args.host, port=args.port,
                           version_tag=pipeline.version_tag, models_info=models)
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="inkmath",
                                     description="Structural handwritten math recognition")
    parser.add_argument("--version", action="version", version=f"inkmath {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("recognize", help="full five-stage recognition of InkML files")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--output-dir")
    p.set_defaults(fn=cmd_recognize)

    p = sub.add_parser("batch", help="recognize a directory, with metrics when ground truth exists")
    p.add_argument("input_dir")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.add_argument("--workers", type=int, default=4)
    p.set_defaults(fn=cmd_batch)

    p = sub.add_parser("segment", help="stage 1 only: print trace groups")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--model", required=True)
    p.set_defaults(fn=cmd_segment)

    p = sub.add_parser("classify", help="stage 2 on ground-truth groups")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--inventory")
    p.add_argument("--dump-images", help="write rendered glyphs as PGM files here")
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("relate", help="stages 1-3: print the uncorrected label graph")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--config", required=True)
    p.add_argument("--scores-csv", help="dump the pair score matrix as CSV")
    p.set_defaults(fn=cmd_relate)

    p = sub.add_parser("correct", help="stages 1-5: print the corrected label graph")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--config", required=True)
    p.add_argument("--json-out", help="write per-symbol distributions as JSON")
    p.set_defaults(fn=cmd_correct)

    p = sub.add_parser("annotate", help="align LaTeX labels to traces over a corpus")
    p.add_argument("input_dir")
    p.add_argument("--model", required=True)
    p.add_argument("--classifier")
    p.add_argument("--inventory")
    p.add_argument("--checker", choices=["crohme", "mathwriting", "none"], default="crohme")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--json")
    p.set_defaults(fn=cmd_annotate)

    for stage in ("segmenter", "classifier", "relator", "corrector", "annotator"):
        p = sub.add_parser(f"train-{stage}", help=f"train the {stage} on an annotated corpus")
        p.add_argument("corpus")
        p.add_argument("--out", required=True)
        p.add_argument("--inventory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--epochs", type=int, default=60)
        p.set_defaults(fn=cmd_train, stage=stage)

    p = sub.add_parser("evaluate", help="compare hypothesis LG files against references")
    p.add_argument("hyp_dir")
    p.add_argument("ref_dir")
    p.add_argument("--json")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("serve", help="run the HTTP recognition service")
    p.add_argument("--config", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8477)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
