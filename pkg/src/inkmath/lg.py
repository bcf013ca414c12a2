"""Label-graph text serialization (CROHME-style O/R lines).

Grammar, one record per line, ASCII, LF line endings:

    O, <sym_id>, <label>, 1.0, <trace_id>[, <trace_id>...]
    R, <src_sym>, <dst_sym>, <relation>, 1.0

O lines are sorted by symbol id, R lines by (src, dst). The ROOT
line_start edge is implicit: the unique node without an incoming R line.
A literal comma label is escaped as COMMA.
"""
from __future__ import annotations

from .errors import StructureError
from .slg import LINE_START, ROOT, Edge, StrokeLabelGraph, SymbolNode, check_slg

_COMMA = "COMMA"


def _escape(label: str) -> str:
    return _COMMA if label == "," else label


def _unescape(label: str) -> str:
    return "," if label == _COMMA else label


def write_lg(graph: StrokeLabelGraph) -> str:
    """Deterministic text form; byte-identical for equal graphs."""
    problems = check_slg(graph.nodes, graph.edges)
    if problems:
        raise StructureError("refusing to serialize invalid graph: " + "; ".join(problems))
    lines = []
    for node in sorted(graph.nodes, key=lambda n: n.id):
        traces = ", ".join(str(t) for t in sorted(node.trace_ids))
        lines.append(f"O, {node.id}, {_escape(node.label)}, 1.0, {traces}")
    rel_edges = [e for e in graph.edges if e.label != LINE_START]
    for e in sorted(rel_edges, key=lambda e: (e.src, e.dst)):
        lines.append(f"R, {e.src}, {e.dst}, {e.label}, 1.0")
    return "\n".join(lines) + "\n"


def parse_lg(text: str) -> StrokeLabelGraph:
    """Inverse of write_lg on its image."""
    nodes: list[SymbolNode] = []
    edges: list[Edge] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        kind = fields[0]
        if kind == "O":
            if len(fields) < 5:
                raise StructureError(f"line {lineno}: O record needs 5+ fields")
            sym_id = int(fields[1])
            label = _unescape(fields[2])
            trace_ids = frozenset(int(f) for f in fields[4:])
            nodes.append(SymbolNode(id=sym_id, trace_ids=trace_ids, label=label))
        elif kind == "R":
            if len(fields) != 5:
                raise StructureError(f"line {lineno}: R record needs 5 fields")
            edges.append(Edge(src=int(fields[1]), dst=int(fields[2]), label=fields[3]))
        else:
            raise StructureError(f"line {lineno}: unknown record type {kind!r}")

    if not nodes:
        raise StructureError("no O lines")
    targets = [e.dst for e in edges]
    if len(set(targets)) != len(targets):
        dup = sorted({t for t in targets if targets.count(t) > 1})
        raise StructureError(f"duplicate incoming edge for node(s) {dup}")
    roots = [n.id for n in nodes if n.id not in set(targets)]
    if len(roots) != 1:
        raise StructureError(
            f"expected exactly one root (missing line_start target), found {len(roots)}"
        )
    edges.append(Edge(src=ROOT, dst=roots[0], label=LINE_START))
    return StrokeLabelGraph(nodes=tuple(nodes), edges=tuple(edges))
