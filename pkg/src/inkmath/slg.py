"""Stroke label graph: symbols owning trace groups, linked by spatial relations.

The graph is a rooted tree. A virtual ROOT node emits exactly one edge
labeled ``line_start`` to the root symbol; every other symbol has exactly
one incoming edge carrying one of the five spatial relations.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import StructureError

ROOT = -1  # virtual root node id

RIGHT = "right"
SUP = "sup"
SUB = "sub"
OVER = "over"
UNDER = "under"
LINE_START = "line_start"
NONE = "none"  # non-edge sentinel, never appears on a stored edge

RELATIONS = (RIGHT, SUP, SUB, OVER, UNDER, LINE_START)
PAIR_RELATIONS = (RIGHT, SUP, SUB, OVER, UNDER)  # valid between two symbols
SCRIPT_RELATIONS = (SUP, SUB, OVER, UNDER)

# Fixed class order used by relation networks: sentinel first, then edges.
RELATION_CLASSES = (NONE, RIGHT, SUP, SUB, OVER, UNDER, LINE_START)


@dataclass(frozen=True)
class SymbolNode:
    id: int
    trace_ids: frozenset[int]
    label: str
    score: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "trace_ids", frozenset(self.trace_ids))
        if not self.trace_ids:
            raise StructureError(f"symbol {self.id} owns no traces")
        if not (0.0 <= self.score <= 1.0):
            raise StructureError(f"symbol {self.id} score {self.score} outside [0,1]")


@dataclass(frozen=True)
class Edge:
    src: int  # node id, or ROOT
    dst: int
    label: str


def check_slg(nodes, edges, inventory=None) -> list[str]:
    """Return a list of invariant violations (empty when the graph is valid)."""
    problems = []
    node_ids = [n.id for n in nodes]
    id_set = set(node_ids)
    if len(id_set) != len(node_ids):
        problems.append("duplicate node ids")
    seen_traces = set()
    for n in nodes:
        overlap = seen_traces & n.trace_ids
        if overlap:
            problems.append(f"trace ids {sorted(overlap)} assigned to more than one symbol")
        seen_traces |= n.trace_ids
        if inventory is not None and n.label not in inventory:
            problems.append(f"symbol {n.id} label {n.label!r} not in inventory")

    line_starts = [e for e in edges if e.label == LINE_START]
    if len(line_starts) != 1:
        problems.append(f"expected exactly one line_start edge, found {len(line_starts)}")
    for e in line_starts:
        if e.src != ROOT:
            problems.append("line_start edge must originate at ROOT")

    incoming: dict[int, int] = {i: 0 for i in id_set}
    for e in edges:
        if e.label == NONE:
            problems.append("edge labeled with the non-edge sentinel")
        elif e.label not in RELATIONS:
            problems.append(f"unknown relation label {e.label!r}")
        if e.label != LINE_START and e.src == ROOT:
            problems.append(f"non-line_start edge from ROOT to {e.dst}")
        if e.src != ROOT and e.src not in id_set:
            problems.append(f"edge source {e.src} is not a node")
        if e.dst not in id_set:
            problems.append(f"edge target {e.dst} is not a node")
        else:
            incoming[e.dst] += 1
    for nid, deg in incoming.items():
        if deg != 1:
            problems.append(f"node {nid} has in-degree {deg}, expected 1")

    if not problems and nodes:
        # In-degree one everywhere plus a single ROOT edge: cycles are the
        # only remaining failure mode.
        parent = {e.dst: e.src for e in edges}
        for nid in id_set:
            seen = set()
            cur = nid
            while cur != ROOT:
                if cur in seen:
                    problems.append(f"cycle through node {cur}")
                    return problems
                seen.add(cur)
                cur = parent[cur]
    return problems


@dataclass(frozen=True)
class StrokeLabelGraph:
    nodes: tuple[SymbolNode, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        problems = check_slg(self.nodes, self.edges)
        if problems:
            raise StructureError("; ".join(problems))

    def validate(self, expression=None, inventory=None) -> list[str]:
        """Re-check invariants; optionally against an expression's trace ids."""
        problems = check_slg(self.nodes, self.edges, inventory=inventory)
        if expression is not None:
            universe = set(expression.trace_ids())
            extra = self.trace_ids() - universe
            if extra:
                problems.append(f"graph references unknown trace ids {sorted(extra)}")
        return problems

    def node(self, node_id: int) -> SymbolNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(f"no node with id {node_id}")

    def trace_ids(self) -> set[int]:
        out: set[int] = set()
        for n in self.nodes:
            out |= n.trace_ids
        return out

    def root_id(self) -> int:
        for e in self.edges:
            if e.label == LINE_START:
                return e.dst
        raise StructureError("graph has no line_start edge")

    def incoming_edge(self, node_id: int) -> Edge:
        for e in self.edges:
            if e.dst == node_id:
                return e
        raise StructureError(f"node {node_id} has no incoming edge")

    def children(self, node_id: int) -> list[Edge]:
        return [e for e in self.edges if e.src == node_id]

    def structurally_equal(self, other: "StrokeLabelGraph") -> bool:
        """Equality up to node renumbering and scores: same trace groups,
        labels and relations."""
        if len(self.nodes) != len(other.nodes):
            return False
        by_traces_a = {n.trace_ids: n for n in self.nodes}
        by_traces_b = {n.trace_ids: n for n in other.nodes}
        if set(by_traces_a) != set(by_traces_b):
            return False
        for key, na in by_traces_a.items():
            if na.label != by_traces_b[key].label:
                return False
        id_to_traces_a = {n.id: n.trace_ids for n in self.nodes}
        id_to_traces_b = {n.id: n.trace_ids for n in other.nodes}

        def edge_key(e, id_to_traces):
            src = None if e.src == ROOT else frozenset(id_to_traces[e.src])
            return (src, frozenset(id_to_traces[e.dst]), e.label)

        edges_a = {edge_key(e, id_to_traces_a) for e in self.edges}
        edges_b = {edge_key(e, id_to_traces_b) for e in other.edges}
        return edges_a == edges_b
