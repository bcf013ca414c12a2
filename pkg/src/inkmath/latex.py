"""LaTeX output from stroke label graphs and structural parsing of LaTeX.

The supported grammar covers single-symbol tokens, commands from the
symbol inventory, ^ and _ scripts, braced groups, and \\frac. Scripts on
big operators (\\sum, \\prod, \\int, \\lim) map to over/under relations;
on anything else they map to sup/sub. A "-" carrying over/under children
is a fraction bar.
"""
from __future__ import annotations

import re

from .errors import ConversionError, LatexParseError
from .layout import LayoutNode, PlanStep, layout_to_plan, plan_to_layout, slg_to_layout
from .slg import OVER, SUB, SUP, UNDER, StrokeLabelGraph
from .symbols import BIG_OPERATORS, FRACTION_BAR

# Commands accepted as plain symbol tokens.
SYMBOL_COMMANDS = {
    "\\alpha", "\\beta", "\\gamma", "\\delta", "\\Delta", "\\theta",
    "\\lambda", "\\mu", "\\pi", "\\phi", "\\sigma", "\\epsilon", "\\omega",
    "\\times", "\\div", "\\pm", "\\leq", "\\geq", "\\neq", "\\rightarrow",
    "\\in", "\\exists", "\\forall", "\\{", "\\}", "\\sum", "\\int",
    "\\prod", "\\lim", "\\sin", "\\cos", "\\tan", "\\log", "\\infty",
    "\\sqrt", "\\ldots", "\\prime", "\\cdot",
}

_SINGLE_CHARS = set("0123456789abcdefghijklmnopqrstuvwxyz"
                    "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
                    "+-=()[]<>!|/.,")

_TOKEN_RE = re.compile(r"\\[a-zA-Z]+|\\[{}]|[\^_{}]|\S")


def _tokenize(latex: str) -> list[str]:
    tokens = []
    for m in _TOKEN_RE.finditer(latex):
        tok = m.group(0)
        if tok.startswith("\\") and len(tok) > 1 and tok not in ("\\frac",):
            if tok not in SYMBOL_COMMANDS:
                raise LatexParseError(f"unsupported command {tok!r}")
        elif tok in ("^", "_", "{", "}", "\\frac"):
            pass
        elif tok not in _SINGLE_CHARS:
            raise LatexParseError(f"unsupported token {tok!r}")
        tokens.append(tok)
    return tokens


class _Parser:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            raise LatexParseError("unexpected end of input")
        self.pos += 1
        return tok

    def expect(self, tok: str):
        got = self.next()
        if got != tok:
            raise LatexParseError(f"expected {tok!r}, got {got!r}")

    def parse_chain(self) -> LayoutNode | None:
        """Baseline sequence of atoms until '}' or end of input."""
        head = None
        base = None
        while self.peek() is not None and self.peek() != "}":
            a_head, a_base = self.parse_atom()
            if head is None:
                head = a_head
            else:
                base.right = a_head
            base = a_base
        return head

    def parse_atom(self) -> tuple[LayoutNode, LayoutNode]:
        """Returns (head, base): head joins the enclosing chain, base is
        where a following sibling attaches."""
        tok = self.next()
        if tok == "{":
            inner = self.parse_chain()
            self.expect("}")
            if inner is None:
                raise LatexParseError("empty group")
            tail = inner
            while tail.right is not None:
                tail = tail.right
            head, base = inner, tail
        elif tok == "\\frac":
            head = base = LayoutNode(label=FRACTION_BAR)
            head.over = self.parse_script_arg(allow_empty=True)
            head.under = self.parse_script_arg(allow_empty=True)
        elif tok in ("^", "_", "}"):
            raise LatexParseError(f"unexpected {tok!r}")
        else:
            head = base = LayoutNode(label=tok)

        while self.peek() in ("^", "_"):
            mark = self.next()
            arg = self.parse_script_arg(allow_empty=False)
            if base.label in BIG_OPERATORS:
                rel = OVER if mark == "^" else UNDER
            else:
                rel = SUP if mark == "^" else SUB
            if base.child(rel) is not None:
                raise LatexParseError(f"duplicate {mark!r} script")
            base.set_child(rel, arg)
        return head, base

    def parse_script_arg(self, allow_empty: bool) -> LayoutNode | None:
        tok = self.peek()
        if tok == "{":
            self.next()
            inner = self.parse_chain()
            self.expect("}")
            if inner is None and not allow_empty:
                raise LatexParseError("empty script argument")
            return inner
        if tok is None or tok in ("^", "_", "}"):
            raise LatexParseError(f"missing script argument before {tok!r}")
        head, _base = self.parse_atom()
        return head


def parse_latex(latex: str) -> LayoutNode:
    """Parse supported LaTeX into a layout tree."""
    latex = latex.strip()
    if latex.startswith("$") and latex.endswith("$") and len(latex) > 1:
        latex = latex[1:-1]
    tokens = _tokenize(latex)
    parser = _Parser(tokens)
    root = parser.parse_chain()
    if parser.peek() is not None:
        raise LatexParseError(f"trailing input at token {parser.peek()!r}")
    if root is None:
        raise LatexParseError("empty expression")
    return root


def parse_latex_structure(latex: str) -> list[PlanStep]:
    """Ordered (symbol, relation, reference, neighbors) steps of a LaTeX
    string, in canonical reading order."""
    return layout_to_plan(parse_latex(latex))


_CMD_TAIL = re.compile(r"\\[a-zA-Z]+$")


def _join(parts) -> str:
    """Concatenate emitted atoms, keeping a space where a trailing
    backslash-letter command would otherwise swallow a following letter."""
    out = ""
    for part in parts:
        if out and part and part[0].isalpha() and _CMD_TAIL.search(out):
            out += " "
        out += part
    return out


def _emit_chain(node: LayoutNode | None) -> str:
    if node is None:
        return ""
    parts = []
    cur = node
    while cur is not None:
        parts.append(_emit_atom(cur))
        cur = cur.right
    return _join(parts)


def _emit_atom(node: LayoutNode) -> str:
    over, under = node.over, node.under
    if node.label == FRACTION_BAR and (over is not None or under is not None):
        s = "\\frac{" + _emit_chain(over) + "}{" + _emit_chain(under) + "}"
    elif node.label in BIG_OPERATORS:
        if (under is not None and node.sub is not None) or (
            over is not None and node.sup is not None
        ):
            raise ConversionError(
                f"big operator node {node.node_id} mixes over/under with sup/sub"
            )
        s = node.label
        if under is not None:
            s += "_{" + _emit_chain(under) + "}"
        if over is not None:
            s += "^{" + _emit_chain(over) + "}"
    else:
        if over is not None or under is not None:
            which = "over and under" if (over and under) else ("over" if over else "under")
            raise ConversionError(
                f"symbol {node.label!r} (node {node.node_id}) has {which} children "
                "but is neither a fraction bar nor a big operator"
            )
        s = node.label
    if node.sub is not None:
        s += "_{" + _emit_chain(node.sub) + "}"
    if node.sup is not None:
        s += "^{" + _emit_chain(node.sup) + "}"
    return s


def layout_to_latex(root: LayoutNode) -> str:
    return _emit_chain(root)


def slg_to_latex(graph: StrokeLabelGraph) -> str:
    """Deterministic LaTeX for an SLG. Braces are always emitted around
    script and fraction arguments."""
    return layout_to_latex(slg_to_layout(graph))


def plan_to_latex(steps) -> str:
    return layout_to_latex(plan_to_layout(steps))


def normalize_latex(latex: str) -> str:
    """Canonical form for string comparison: parse and re-emit, which strips
    whitespace and braces redundancy. Falls back to whitespace stripping for
    strings outside the grammar."""
    try:
        return layout_to_latex(parse_latex(latex))
    except LatexParseError:
        return re.sub(r"\s+", "", latex)
