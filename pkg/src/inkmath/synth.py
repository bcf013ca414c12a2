"""Synthetic handwriting: a small parametric glyph library and an
expression composer that places glyphs by layout relation, producing
matched (Expression, StrokeLabelGraph) pairs for training corpora and
test fixtures.

Glyphs are defined in a local [0,1]x[0,1] box with y pointing up; each is
a list of stroke polylines. Composition walks a layout tree, scaling
scripts down and offsetting them vertically, so the resulting geometry
carries the relation signal the networks learn from.
"""
from __future__ import annotations

import numpy as np

from .ink import Expression, Trace
from .latex import layout_to_latex, parse_latex
from .layout import LayoutNode, linearize
from .slg import LINE_START, ROOT, Edge, StrokeLabelGraph, SymbolNode
from .symbols import BIG_OPERATORS, FRACTION_BAR


def _line(p0, p1, n=8):
    t = np.linspace(0.0, 1.0, n)[:, None]
    return np.array(p0) + t * (np.array(p1) - np.array(p0))


def _arc(cx, cy, rx, ry, a0, a1, n=14):
    t = np.deg2rad(np.linspace(a0, a1, n))
    return np.column_stack([cx + rx * np.cos(t), cy + ry * np.sin(t)])


def _poly(*points, n_per_seg=6):
    segs = [_line(points[i], points[i + 1], n_per_seg) for i in range(len(points) - 1)]
    return np.vstack([segs[0]] + [s[1:] for s in segs[1:]])


def _ellipse(cx=0.5, cy=0.5, rx=0.38, ry=0.48):
    return _arc(cx, cy, rx, ry, 90, 450, n=20)


# label -> (list of strokes, aspect w/h)
GLYPHS: dict = {
    "0": ([_ellipse()], 0.55),
    "1": ([_line((0.5, 1.0), (0.5, 0.0))], 0.3),
    "2": ([np.vstack([_arc(0.5, 0.75, 0.32, 0.25, 160, -20, n=10),
                      _line((0.78, 0.65), (0.18, 0.0), 6)[1:],
                      _line((0.18, 0.0), (0.85, 0.0), 5)[1:]])], 0.55),
    "3": ([np.vstack([_arc(0.45, 0.75, 0.3, 0.25, 150, -60, n=10),
                      _arc(0.45, 0.25, 0.33, 0.26, 120, -130, n=10)[1:]])], 0.55),
    "4": ([_poly((0.6, 1.0), (0.12, 0.35), (0.9, 0.35)),
           _line((0.62, 0.8), (0.62, 0.0))], 0.6),
    "5": ([np.vstack([_line((0.8, 1.0), (0.25, 1.0), 5),
                      _line((0.25, 1.0), (0.22, 0.6), 4)[1:],
                      _arc(0.45, 0.32, 0.32, 0.3, 110, -120, n=10)[1:]])], 0.55),
    "7": ([_poly((0.15, 1.0), (0.85, 1.0), (0.4, 0.0))], 0.55),
    "9": ([np.vstack([_ellipse(0.5, 0.72, 0.3, 0.26),
                      _line((0.8, 0.72), (0.62, 0.0), 7)[1:]])], 0.5),
    "a": ([np.vstack([_ellipse(0.42, 0.32, 0.3, 0.3),
                      _poly((0.72, 0.6), (0.74, 0.0))[1:]])], 0.55),
    "b": ([np.vstack([_line((0.22, 1.0), (0.22, 0.0), 8),
                      _arc(0.45, 0.3, 0.28, 0.3, -140, 140, n=10)])], 0.5),
    "c": ([_arc(0.55, 0.5, 0.38, 0.48, 60, 300, n=14)], 0.5),
    "d": ([np.vstack([_ellipse(0.4, 0.3, 0.28, 0.3),
                      _line((0.75, 1.0), (0.75, 0.0), 8)[1:]])], 0.5),
    "n": ([np.vstack([_line((0.2, 0.62), (0.2, 0.0), 6),
                      _arc(0.46, 0.35, 0.26, 0.27, 180, 0, n=8),
                      _line((0.72, 0.35), (0.72, 0.0), 5)[1:]])], 0.6),
    "x": ([_line((0.1, 0.95), (0.9, 0.05)), _line((0.9, 0.95), (0.1, 0.05))], 0.6),
    "y": ([_line((0.1, 1.0), (0.5, 0.35)), _poly((0.9, 1.0), (0.3, -0.3))], 0.55),
    "t": ([_line((0.5, 1.0), (0.5, 0.0)), _line((0.15, 0.7), (0.85, 0.7))], 0.45),
    "A": ([_line((0.5, 1.0), (0.08, 0.0)), _line((0.5, 1.0), (0.92, 0.0)),
           _line((0.25, 0.4), (0.75, 0.4))], 0.7),
    "B": ([_line((0.18, 1.0), (0.18, 0.0)),
           np.vstack([_arc(0.4, 0.75, 0.3, 0.25, 90, -90, n=9),
                      _arc(0.42, 0.25, 0.34, 0.25, 90, -90, n=9)])], 0.6),
    "O": ([_ellipse()], 0.55),
    "+": ([_line((0.1, 0.5), (0.9, 0.5)), _line((0.5, 0.9), (0.5, 0.1))], 0.7),
    "-": ([_line((0.05, 0.5), (0.95, 0.5), 6)], 1.0),
    "=": ([_line((0.05, 0.62), (0.95, 0.62), 6), _line((0.05, 0.38), (0.95, 0.38), 6)], 0.9),
    ">": ([_poly((0.12, 0.85), (0.88, 0.5), (0.12, 0.15))], 0.6),
    "<": ([_poly((0.88, 0.85), (0.12, 0.5), (0.88, 0.15))], 0.6),
    "(": ([_arc(1.0, 0.5, 0.45, 0.52, 110, 250, n=12)], 0.3),
    ")": ([_arc(0.0, 0.5, 0.45, 0.52, 70, -70, n=12)], 0.3),
    "\\sum": ([_poly((0.85, 1.0), (0.15, 1.0), (0.55, 0.5), (0.15, 0.0), (0.85, 0.0))], 0.75),
    "\\int": ([np.vstack([_arc(0.62, 0.9, 0.2, 0.12, 90, 180, n=6),
                          _line((0.42, 0.9), (0.42, 0.1), 8)[1:],
                          _arc(0.22, 0.1, 0.2, 0.12, 0, -90, n=6)[1:]])], 0.45),
    "\\pi": ([_line((0.05, 0.78), (0.95, 0.78)),
              _line((0.3, 0.78), (0.28, 0.0)),
              _poly((0.7, 0.78), (0.72, 0.12), (0.85, 0.05))], 0.7),
    "\\alpha": ([np.vstack([_arc(0.42, 0.5, 0.3, 0.42, 40, 320, n=14),
                            _line((0.65, 0.82), (0.95, 0.05), 6)])], 0.65),
    "\\times": ([_line((0.15, 0.85), (0.85, 0.15)), _line((0.85, 0.85), (0.15, 0.15))], 0.6),
    "\\rightarrow": ([np.vstack([_line((0.02, 0.5), (0.98, 0.5), 8),
                                 _poly((0.7, 0.8), (0.98, 0.5), (0.7, 0.2))[1:]])], 1.2),
    "\\lim": ([_line((0.08, 0.95), (0.08, 0.05)),
               np.vstack([_line((0.3, 0.6), (0.3, 0.05), 5),
                          _line((0.3, 0.78), (0.3, 0.72), 2)[1:]]),
               np.vstack([_line((0.5, 0.6), (0.5, 0.05), 4),
                          _arc(0.62, 0.42, 0.12, 0.18, 180, 0, n=5)[1:],
                          _line((0.74, 0.42), (0.74, 0.05), 3)[1:],
                          _arc(0.86, 0.42, 0.12, 0.18, 180, 0, n=5)[1:],
                          _line((0.98, 0.42), (0.98, 0.05), 3)[1:]])], 1.0),
}


def glyph_labels() -> list[str]:
    return sorted(GLYPHS)


def glyph_strokes(label: str, x0: float, y0: float, size: float):
    """The glyph's strokes scaled to height `size` with its lower-left
    corner at (x0, y0). Returns (list of arrays, width)."""
    strokes, aspect = GLYPHS[label]
    w = aspect * size
    out = []
    for s in strokes:
        pts = s.copy()
        pts[:, 0] = x0 + pts[:, 0] * w
        pts[:, 1] = y0 + pts[:, 1] * size
        out.append(pts)
    return out, w


SCRIPT_SCALE = 0.55
FRAC_SCALE = 0.7
GAP = 0.14


class _Placer:
    def __init__(self):
        self.placed = []  # (LayoutNode, [stroke arrays]) in reading order

    def measure_chain(self, node: LayoutNode | None, size: float) -> float:
        w = 0.0
        cur = node
        while cur is not None:
            w += self.measure_atom(cur, size)
            cur = cur.right
            if cur is not None:
                w += GAP * size
        return w

    def measure_atom(self, node: LayoutNode, size: float) -> float:
        if node.label == FRACTION_BAR and (node.over or node.under):
            inner = max(self.measure_chain(node.over, FRAC_SCALE * size),
                        self.measure_chain(node.under, FRAC_SCALE * size))
            w = inner + 0.2 * size
        elif node.label in BIG_OPERATORS and (node.over or node.under):
            w = GLYPHS.get(node.label, (None, 0.6))[1] * size
            w = max(w, self.measure_chain(node.over, SCRIPT_SCALE * size),
                    self.measure_chain(node.under, SCRIPT_SCALE * size))
        else:
            w = GLYPHS.get(node.label, (None, 0.6))[1] * size
        if node.sub is not None:
            w += 0.05 * size + self.measure_chain(node.sub, SCRIPT_SCALE * size)
        if node.sup is not None:
            w += 0.05 * size + self.measure_chain(node.sup, SCRIPT_SCALE * size)
        return w

    def place_chain(self, node: LayoutNode | None, x: float, y: float, size: float) -> float:
        cur = node
        while cur is not None:
            x = self.place_atom(cur, x, y, size)
            cur = cur.right
            if cur is not None:
                x += GAP * size
        return x

    def place_atom(self, node: LayoutNode, x: float, y: float, size: float) -> float:
        if node.label == FRACTION_BAR and (node.over or node.under):
            inner = max(self.measure_chain(node.over, FRAC_SCALE * size),
                        self.measure_chain(node.under, FRAC_SCALE * size))
            bar_w = inner + 0.2 * size
            mid = y + 0.45 * size
            bar = _line((x, mid), (x + bar_w, mid), 8)
            self.placed.append((node, [bar]))
            num_w = self.measure_chain(node.over, FRAC_SCALE * size)
            den_w = self.measure_chain(node.under, FRAC_SCALE * size)
            if node.over is not None:
                self.place_chain(node.over, x + (bar_w - num_w) / 2,
                                 mid + 0.12 * size, FRAC_SCALE * size)
            if node.under is not None:
                self.place_chain(node.under, x + (bar_w - den_w) / 2,
                                 mid - 0.12 * size - FRAC_SCALE * size, FRAC_SCALE * size)
            end = x + bar_w
        elif node.label in BIG_OPERATORS and (node.over or node.under):
            strokes, w = glyph_strokes(node.label, x, y, size)
            self.placed.append((node, strokes))
            if node.over is not None:
                ow = self.measure_chain(node.over, SCRIPT_SCALE * size)
                self.place_chain(node.over, x + (w - ow) / 2, y + 1.15 * size,
                                 SCRIPT_SCALE * size)
            if node.under is not None:
                uw = self.measure_chain(node.under, SCRIPT_SCALE * size)
                self.place_chain(node.under, x + (w - uw) / 2,
                                 y - 0.15 * size - SCRIPT_SCALE * size, SCRIPT_SCALE * size)
            end = x + max(w,
                          self.measure_chain(node.over, SCRIPT_SCALE * size),
                          self.measure_chain(node.under, SCRIPT_SCALE * size))
        else:
            strokes, w = glyph_strokes(node.label, x, y, size)
            self.placed.append((node, strokes))
            end = x + w

        if node.sup is not None:
            end_sup = self.place_chain(node.sup, end + 0.05 * size,
                                       y + 0.55 * size, SCRIPT_SCALE * size)
        else:
            end_sup = end
        if node.sub is not None:
            end_sub = self.place_chain(node.sub, end + 0.05 * size,
                                       y - 0.3 * size, SCRIPT_SCALE * size)
        else:
            end_sub = end
        return max(end, end_sup, end_sub)


def compose(latex_or_layout, source_id: str = "", rng=None, jitter: float = 0.0
            ) -> tuple[Expression, StrokeLabelGraph]:
    """Render a LaTeX string (or layout tree) into synthetic traces with
    its ground-truth SLG. Optional per-point jitter roughens the strokes."""
    if isinstance(latex_or_layout, str):
        root = parse_latex(latex_or_layout)
        latex = latex_or_layout
    else:
        root = latex_or_layout
        latex = layout_to_latex(root)

    placer = _Placer()
    placer.place_chain(root, 0.0, 0.0, 1.0)

    order = {id(node): i for i, (node, _, _) in enumerate(linearize(root))}
    placer.placed.sort(key=lambda item: order[id(item[0])])

    traces = []
    nodes = []
    edges = []
    lin = linearize(root)
    strokes_of = {id(node): strokes for node, strokes in placer.placed}
    index_of = {id(node): i for i, (node, _, _) in enumerate(lin)}
    tid = 0
    for i, (node, rel, ref) in enumerate(lin):
        my_traces = []
        for s in strokes_of[id(node)]:
            pts = s.copy()
            if rng is not None and jitter > 0:
                pts = pts + rng.normal(0.0, jitter, size=pts.shape)
            traces.append(Trace(id=tid, points=pts))
            my_traces.append(tid)
            tid += 1
        nodes.append(SymbolNode(id=i, trace_ids=frozenset(my_traces), label=node.label))
        edges.append(Edge(src=ROOT if ref < 0 else ref, dst=i, label=rel))

    expr = Expression(traces=tuple(traces), source_id=source_id, latex_label=latex)
    graph = StrokeLabelGraph(nodes=tuple(nodes), edges=tuple(edges))
    return expr, graph


def fig_style_fixture() -> tuple[Expression, StrokeLabelGraph]:
    """The canonical multi-stroke fixture: A_2 > B_2 (5 symbols, 8 traces)."""
    return compose("A_{2}>B_{2}", source_id="fig-fixture")
