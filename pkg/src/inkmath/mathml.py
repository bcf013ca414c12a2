"""Presentation MathML emission and parsing, mirroring the LaTeX converter.

Emitted elements carry xml:id attributes ("s<node id>") when the layout
tree came from an SLG, so trace groups in enriched InkML can reference
their symbol.
"""
from __future__ import annotations

import xml.etree.ElementTree as ET

from .errors import ConversionError
from .layout import LayoutNode, slg_to_layout
from .slg import StrokeLabelGraph
from .symbols import BIG_OPERATORS, FRACTION_BAR

MATHML_NS = "http://www.w3.org/1998/Math/MathML"
XML_NS = "http://www.w3.org/XML/1998/namespace"

_GREEK_CHARS = {
    "\\alpha": "α", "\\beta": "β", "\\gamma": "γ",
    "\\delta": "δ", "\\Delta": "Δ", "\\theta": "θ",
    "\\lambda": "λ", "\\mu": "μ", "\\pi": "π",
    "\\phi": "φ", "\\sigma": "σ", "\\epsilon": "ε",
    "\\omega": "ω",
}
_OPERATOR_CHARS = {
    "\\times": "×", "\\div": "÷", "\\pm": "±",
    "\\leq": "≤", "\\geq": "≥", "\\neq": "≠",
    "\\rightarrow": "→", "\\in": "∈", "\\exists": "∃",
    "\\forall": "∀", "\\sum": "∑", "\\prod": "∏",
    "\\int": "∫", "\\infty": "∞", "\\ldots": "…",
    "\\{": "{", "\\}": "}", "\\cdot": "⋅", "\\prime": "′",
    "\\sqrt": "√",
}
_FUNC_NAMES = {"\\sin": "sin", "\\cos": "cos", "\\tan": "tan",
               "\\log": "log", "\\lim": "lim"}

_TEXT_TO_LABEL = {}
for _lab, _ch in {**_GREEK_CHARS, **_OPERATOR_CHARS, **_FUNC_NAMES}.items():
    _TEXT_TO_LABEL.setdefault(_ch, _lab)


def _leaf(node: LayoutNode) -> ET.Element:
    lab = node.label
    if lab in _GREEK_CHARS:
        tag, text = "mi", _GREEK_CHARS[lab]
    elif lab in _FUNC_NAMES:
        tag, text = "mi", _FUNC_NAMES[lab]
    elif lab in _OPERATOR_CHARS:
        tag, text = "mo", _OPERATOR_CHARS[lab]
    elif len(lab) == 1 and lab.isdigit():
        tag, text = "mn", lab
    elif len(lab) == 1 and lab.isalpha():
        tag, text = "mi", lab
    else:
        tag, text = "mo", lab
    el = ET.Element(tag)
    el.text = text
    return el


def _with_id(el: ET.Element, node: LayoutNode) -> ET.Element:
    if node.node_id is not None:
        el.set("xml:id", f"s{node.node_id}")
    return el


def _atom(node: LayoutNode) -> ET.Element:
    over, under = node.over, node.under
    if node.label == FRACTION_BAR and (over is not None or under is not None):
        el = ET.Element("mfrac")
        _with_id(el, node)
        el.append(_chain(over))
        el.append(_chain(under))
    elif node.label in BIG_OPERATORS and (over is not None or under is not None):
        if over is not None and under is not None:
            el = ET.Element("munderover")
            el.append(_with_id(_leaf(node), node))
            el.append(_chain(under))
            el.append(_chain(over))
        elif under is not None:
            el = ET.Element("munder")
            el.append(_with_id(_leaf(node), node))
            el.append(_chain(under))
        else:
            el = ET.Element("mover")
            el.append(_with_id(_leaf(node), node))
            el.append(_chain(over))
    else:
        if over is not None or under is not None:
            raise ConversionError(
                f"symbol {node.label!r} (node {node.node_id}) has over/under children "
                "but is neither a fraction bar nor a big operator"
            )
        el = _with_id(_leaf(node), node)

    if node.sub is not None and node.sup is not None:
        wrap = ET.Element("msubsup")
        wrap.append(el)
        wrap.append(_chain(node.sub))
        wrap.append(_chain(node.sup))
        el = wrap
    elif node.sub is not None:
        wrap = ET.Element("msub")
        wrap.append(el)
        wrap.append(_chain(node.sub))
        el = wrap
    elif node.sup is not None:
        wrap = ET.Element("msup")
        wrap.append(el)
        wrap.append(_chain(node.sup))
        el = wrap
    return el


def _chain(node: LayoutNode | None) -> ET.Element:
    atoms = []
    cur = node
    while cur is not None:
        atoms.append(_atom(cur))
        cur = cur.right
    if node is None:
        return ET.Element("mrow")
    if len(atoms) == 1:
        return atoms[0]
    row = ET.Element("mrow")
    for a in atoms:
        row.append(a)
    return row


def layout_to_mathml_element(root: LayoutNode) -> ET.Element:
    math = ET.Element("math", {"xmlns": MATHML_NS})
    math.append(_chain(root))
    return math


def slg_to_mathml(graph: StrokeLabelGraph) -> str:
    """Deterministic presentation MathML for an SLG."""
    el = layout_to_mathml_element(slg_to_layout(graph))
    return ET.tostring(el, encoding="unicode")


def _localname(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _xml_id(el: ET.Element) -> str | None:
    return el.get(f"{{{XML_NS}}}id") or el.get("xml:id")


def _parse_chain(children: list[ET.Element]) -> LayoutNode | None:
    head = None
    for el in children:
        node = _parse_atom(el)
        if head is None:
            head = node
        else:
            base = head
            while base.right is not None:
                base = base.right
            base.right = node
    return head


def _attach_chain(el: ET.Element) -> LayoutNode:
    """Parse an element that represents one argument (possibly an mrow)."""
    if _localname(el.tag) == "mrow":
        inner = _parse_chain(list(el))
        if inner is None:
            raise ConversionError("empty mrow")
        return inner
    return _parse_atom(el)


def _id_of(el: ET.Element) -> tuple[int | None, str | None]:
    raw = _xml_id(el)
    if raw and raw.startswith("s") and raw[1:].lstrip("-").isdigit():
        return int(raw[1:]), raw
    return None, raw


def _parse_atom(el: ET.Element) -> LayoutNode:
    tag = _localname(el.tag)
    kids = list(el)
    if tag in ("mi", "mn", "mo", "mtext"):
        text = (el.text or "").strip()
        label = _TEXT_TO_LABEL.get(text, text)
        nid, raw = _id_of(el)
        return LayoutNode(label=label, node_id=nid, xml_id=raw)
    if tag == "mrow":
        inner = _parse_chain(kids)
        if inner is None:
            raise ConversionError("empty mrow")
        return inner
    if tag == "mfrac":
        if len(kids) != 2:
            raise ConversionError("mfrac expects 2 children")
        nid, raw = _id_of(el)
        node = LayoutNode(label=FRACTION_BAR, node_id=nid, xml_id=raw)
        node.over = _attach_or_none(kids[0])
        node.under = _attach_or_none(kids[1])
        return node
    if tag in ("msub", "msup", "msubsup", "munder", "mover", "munderover"):
        base = _parse_atom(kids[0])
        anchor = base
        while anchor.right is not None:
            anchor = anchor.right
        if tag == "msub":
            anchor.sub = _attach_chain(kids[1])
        elif tag == "msup":
            anchor.sup = _attach_chain(kids[1])
        elif tag == "msubsup":
            anchor.sub = _attach_chain(kids[1])
            anchor.sup = _attach_chain(kids[2])
        elif tag == "munder":
            anchor.under = _attach_chain(kids[1])
        elif tag == "mover":
            anchor.over = _attach_chain(kids[1])
        else:
            anchor.under = _attach_chain(kids[1])
            anchor.over = _attach_chain(kids[2])
        return base
    raise ConversionError(f"unsupported MathML element <{tag}>")


def _attach_or_none(el: ET.Element) -> LayoutNode | None:
    if _localname(el.tag) == "mrow" and len(el) == 0:
        return None
    return _attach_chain(el)


def mathml_to_layout(source: "str | ET.Element") -> LayoutNode:
    """Parse presentation MathML back into a layout tree."""
    el = ET.fromstring(source) if isinstance(source, str) else source
    if _localname(el.tag) != "math":
        raise ConversionError("expected a <math> root element")
    kids = list(el)
    root = _parse_chain(kids)
    if root is None:
        raise ConversionError("empty <math> element")
    return root
