"""Structural layout tree shared by the LaTeX and MathML converters.

A LayoutNode mirrors the tree shape of a stroke label graph: every node
has at most one child per relation (sup, sub, over, under, right). The
canonical linearization visits a node, then its sup, sub, over, under and
right children, which yields natural reading order for math along a line.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConversionError
from .slg import (
    LINE_START,
    OVER,
    PAIR_RELATIONS,
    RIGHT,
    ROOT,
    SUB,
    SUP,
    UNDER,
    StrokeLabelGraph,
)

# Child visit order for linearization ("reading order").
TRAVERSAL_ORDER = (SUP, SUB, OVER, UNDER, RIGHT)


@dataclass
class LayoutNode:
    label: str
    node_id: int | None = None  # originating SLG node id, when known
    xml_id: str | None = None  # xml:id seen when parsed from MathML
    sup: "LayoutNode | None" = None
    sub: "LayoutNode | None" = None
    over: "LayoutNode | None" = None
    under: "LayoutNode | None" = None
    right: "LayoutNode | None" = None

    def child(self, rel: str) -> "LayoutNode | None":
        return getattr(self, rel)

    def set_child(self, rel: str, node: "LayoutNode | None"):
        if rel not in PAIR_RELATIONS:
            raise ValueError(f"not a child relation: {rel}")
        setattr(self, rel, node)

    def children(self) -> list[tuple[str, "LayoutNode"]]:
        out = []
        for rel in TRAVERSAL_ORDER:
            c = self.child(rel)
            if c is not None:
                out.append((rel, c))
        return out


@dataclass(frozen=True)
class PlanStep:
    """One step of the structural plan: attach `symbol` to the symbol at
    step `ref_index` via relation `rel`. The root step has rel line_start
    and ref_index -1. `neighbors` lists the child symbols that will attach
    to this one later, with their relations."""

    symbol: str
    rel: str
    ref_index: int
    neighbors: tuple[tuple[str, str], ...] = field(default_factory=tuple)


def slg_to_layout(graph: StrokeLabelGraph) -> LayoutNode:
    """Build the layout tree of an SLG. Fails when a node carries two
    children of the same relation (not expressible along one line)."""
    nodes = {n.id: LayoutNode(label=n.label, node_id=n.id) for n in graph.nodes}
    for e in graph.edges:
        if e.label == LINE_START:
            continue
        parent = nodes[e.src]
        if parent.child(e.label) is not None:
            raise ConversionError(
                f"node {e.src} has two {e.label!r} children; not convertible"
            )
        parent.set_child(e.label, nodes[e.dst])
    return nodes[graph.root_id()]


def linearize(root: LayoutNode) -> list[tuple[LayoutNode, str, int]]:
    """Depth-first reading order: list of (node, relation-to-parent,
    parent-step-index). The root comes first with (line_start, -1)."""
    out: list[tuple[LayoutNode, str, int]] = []

    def visit(node: LayoutNode, rel: str, ref: int):
        idx = len(out)
        out.append((node, rel, ref))
        for child_rel, child in node.children():
            visit(child, child_rel, idx)

    visit(root, LINE_START, -1)
    return out


def layout_to_plan(root: LayoutNode) -> list[PlanStep]:
    steps = []
    for node, rel, ref in linearize(root):
        neighbors = tuple((c.label, r) for r, c in node.children())
        steps.append(PlanStep(symbol=node.label, rel=rel, ref_index=ref, neighbors=neighbors))
    return steps


def plan_to_layout(steps) -> LayoutNode:
    """Rebuild a layout tree from plan steps (inverse of layout_to_plan)."""
    if not steps:
        raise ValueError("empty plan")
    nodes = [LayoutNode(label=s.symbol) for s in steps]
    for i, s in enumerate(steps):
        if s.ref_index < 0:
            continue
        nodes[s.ref_index].set_child(s.rel, nodes[i])
    return nodes[0]


def ordered_node_ids(graph: StrokeLabelGraph) -> list[int]:
    """SLG node ids in canonical reading order."""
    root = slg_to_layout(graph)
    return [node.node_id for node, _, _ in linearize(root)]
