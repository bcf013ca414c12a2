"""Structural online handwritten math recognition.

Pen traces in, stroke label graph plus LaTeX/MathML out, via a five-stage
pipeline (segment, classify, relate, correct, re-relate), with an
auto-annotation system that aligns LaTeX labels to raw traces.
"""

__version__ = "0.1.0"

from .ink import Expression, Point, Trace
from .inkml import parse_inkml, write_inkml
from .latex import parse_latex_structure, slg_to_latex
from .lg import parse_lg, write_lg
from .mathml import slg_to_mathml
from .slg import (
    LINE_START,
    NONE,
    OVER,
    RELATIONS,
    RIGHT,
    ROOT,
    SUB,
    SUP,
    UNDER,
    Edge,
    StrokeLabelGraph,
    SymbolNode,
)

__all__ = [
    "Expression", "Point", "Trace",
    "StrokeLabelGraph", "SymbolNode", "Edge",
    "ROOT", "RIGHT", "SUP", "SUB", "OVER", "UNDER", "LINE_START", "NONE",
    "RELATIONS",
    "parse_inkml", "write_inkml", "parse_lg", "write_lg",
    "slg_to_latex", "parse_latex_structure", "slg_to_mathml",
    "__version__",
]
