"""InkML reading and enriched InkML writing.

The reader accepts namespaced or bare documents, keeps only (x, y) from
each coordinate tuple, and remaps document trace ids to dense integers in
document order. When per-symbol traceGroup annotations are present, a
ground-truth SLG is reconstructed; relations come from the MathML
annotation block when available, else from the LaTeX truth label.
"""
from __future__ import annotations

import xml.etree.ElementTree as ET

from .errors import ConversionError, InkmlParseError, IntegrityError, LatexParseError
from .ink import Expression, Trace
from .latex import parse_latex, slg_to_latex
from .layout import LayoutNode, linearize, slg_to_layout
from .mathml import MATHML_NS, layout_to_mathml_element, mathml_to_layout
from .slg import LINE_START, ROOT, Edge, StrokeLabelGraph, SymbolNode

INKML_NS = "http://www.w3.org/2003/InkML"


def _local(tag) -> str:
    return tag.rsplit("}", 1)[-1] if isinstance(tag, str) else ""


def _attr(el: ET.Element, name: str) -> str | None:
    for key, val in el.attrib.items():
        if key == name or key.endswith("}" + name):
            return val
    return None


def _parse_trace_text(text: str, trace_id: int) -> list[list[float]]:
    points = []
    for chunk in (text or "").split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        vals = chunk.split()
        if len(vals) < 2:
            raise IntegrityError(f"trace {trace_id}: point {chunk!r} has < 2 channels")
        points.append([float(vals[0]), float(vals[1])])
    if not points:
        raise IntegrityError(f"trace {trace_id} has no points")
    return points


def parse_inkml(source) -> tuple[Expression, StrokeLabelGraph | None]:
    """Parse an InkML document (bytes, str, or file path).

    Returns the expression and, when symbol-level traceGroups are present
    and relations can be recovered, its ground-truth SLG.
    """
    if isinstance(source, bytes):
        data = source.decode("utf-8")
    elif isinstance(source, str) and source.lstrip().startswith("<"):
        data = source
    else:
        with open(source, "r", encoding="utf-8") as fh:
            data = fh.read()
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, col = exc.position
        raise InkmlParseError(str(exc.msg), line=line, column=col) from exc

    traces: list[Trace] = []
    id_map: dict[str, int] = {}
    latex_label = None
    source_id = ""
    mathml_el = None

    for el in root.iter():
        if _local(el.tag) == "trace":
            raw_id = _attr(el, "id") or str(len(traces))
            dense = len(traces)
            id_map[raw_id] = dense
            traces.append(Trace(id=dense, points=_parse_trace_text(el.text, dense)))

    # Expression-level annotations live at the top level (traceGroup
    # annotations are handled separately).
    for el in root:
        tag = _local(el.tag)
        if tag == "annotation":
            kind = _attr(el, "type")
            text = (el.text or "").strip()
            if kind == "truth":
                latex_label = text
            elif kind in ("UI", "writer") and not source_id:
                source_id = text
        elif tag == "annotationXML":
            for sub in el:
                if _local(sub.tag) == "math":
                    mathml_el = sub

    if not traces:
        raise IntegrityError("document contains no traces")
    expr = Expression(traces=tuple(traces), source_id=source_id, latex_label=latex_label)

    groups = _collect_symbol_groups(root, id_map)
    if not groups:
        return expr, None
    slg = _reconstruct_slg(groups, mathml_el, latex_label)
    if slg is not None:
        problems = slg.validate(expression=expr)
        if problems:
            raise IntegrityError("; ".join(problems))
    return expr, slg


def _collect_symbol_groups(root, id_map) -> list[dict]:
    """Leaf traceGroups carrying a symbol label and traceView refs."""
    groups = []
    for el in root.iter():
        if _local(el.tag) != "traceGroup":
            continue
        views = [c for c in el if _local(c.tag) == "traceView"]
        if not views:
            continue
        label = None
        href = None
        for c in el:
            if _local(c.tag) == "annotation" and _attr(c, "type") == "truth":
                label = (c.text or "").strip()
            elif _local(c.tag) == "annotationXML":
                href = _attr(c, "href")
        if label in (None, "", "Segmentation", "From ITF"):
            continue
        trace_ids = set()
        for v in views:
            ref = _attr(v, "traceDataRef")
            if ref not in id_map:
                raise IntegrityError(f"traceGroup references unknown trace id {ref!r}")
            trace_ids.add(id_map[ref])
        groups.append({"label": label, "trace_ids": frozenset(trace_ids), "href": href})
    return groups


def _reconstruct_slg(groups, mathml_el, latex_label) -> StrokeLabelGraph | None:
    layout = None
    if mathml_el is not None:
        try:
            layout = mathml_to_layout(mathml_el)
        except ConversionError:
            layout = None
    if layout is None and latex_label:
        try:
            layout = parse_latex(latex_label)
        except LatexParseError:
            layout = None
    if layout is None:
        return None

    order = linearize(layout)
    if len(order) != len(groups):
        return None

    # Prefer explicit href links; fall back to label-sequence alignment.
    by_href = {g["href"]: g for g in groups if g["href"]}
    assignments = []
    if len(by_href) == len(groups) and all(
        node.xml_id in by_href for node, _, _ in order
    ):
        for node, rel, ref in order:
            assignments.append((node, rel, ref, by_href[node.xml_id]))
    else:
        group_labels = [g["label"] for g in groups]
        step_labels = [node.label for node, _, _ in order]
        if group_labels != step_labels:
            return None
        for (node, rel, ref), grp in zip(order, groups):
            assignments.append((node, rel, ref, grp))

    nodes = []
    edges = []
    for idx, (node, rel, ref, grp) in enumerate(assignments):
        nodes.append(SymbolNode(id=idx, trace_ids=grp["trace_ids"], label=node.label))
        src = ROOT if ref < 0 else ref
        edges.append(Edge(src=src, dst=idx, label=rel))
    return StrokeLabelGraph(nodes=tuple(nodes), edges=tuple(edges))


def _format_points(points) -> str:
    return ", ".join(f"{x:g} {y:g}" for x, y in points)


def write_inkml(expr: Expression, slg: StrokeLabelGraph | None = None) -> str:
    """Serialize an expression (optionally with its SLG annotations) to
    enriched InkML: truth annotation, MathML block, traces, traceGroups."""
    ink = ET.Element("ink", {"xmlns": INKML_NS})
    if expr.source_id:
        ui = ET.SubElement(ink, "annotation", {"type": "UI"})
        ui.text = expr.source_id

    if slg is not None:
        latex = expr.latex_label or f"${slg_to_latex(slg)}$"
        truth = ET.SubElement(ink, "annotation", {"type": "truth"})
        truth.text = latex
        axml = ET.SubElement(ink, "annotationXML",
                             {"type": "truth", "encoding": "MathML-Presentation"})
        axml.append(layout_to_mathml_element(slg_to_layout(slg)))
    elif expr.latex_label:
        truth = ET.SubElement(ink, "annotation", {"type": "truth"})
        truth.text = expr.latex_label

    for trace in expr.traces:
        t = ET.SubElement(ink, "trace", {"id": str(trace.id)})
        t.text = _format_points(trace.points)

    if slg is not None:
        top = ET.SubElement(ink, "traceGroup", {"xml:id": "TG0"})
        seg = ET.SubElement(top, "annotation", {"type": "truth"})
        seg.text = "Segmentation"
        order = linearize(slg_to_layout(slg))
        for node, _rel, _ref in order:
            sym = slg.node(node.node_id)
            tg = ET.SubElement(top, "traceGroup", {"xml:id": f"TG{sym.id + 1}"})
            ann = ET.SubElement(tg, "annotation", {"type": "truth"})
            ann.text = sym.label
            ET.SubElement(tg, "annotationXML", {"href": f"s{sym.id}"})
            for tid in sorted(sym.trace_ids):
                ET.SubElement(tg, "traceView", {"traceDataRef": str(tid)})

    body = ET.tostring(ink, encoding="unicode")
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + body + "\n"
