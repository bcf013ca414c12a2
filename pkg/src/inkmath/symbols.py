"""Symbol class inventory and coarse structural categories.

The inventory is a plain text file, one label per line, so alternative
class sets (e.g. a 254-class list) can be swapped in without code changes.
The packaged default has 101 entries.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

OOV = "<oov>"  # bucket for labels outside the inventory

# Coarse categories for the 9-feature structural prior mask.
STRUCT_CATEGORIES = (
    "digit",
    "latin",
    "greek",
    "binary_op",
    "relation",
    "bracket",
    "big_op",
    "function",
    "other",
)

_GREEK = {
    "\\alpha", "\\beta", "\\gamma", "\\delta", "\\Delta", "\\theta",
    "\\lambda", "\\mu", "\\pi", "\\phi", "\\sigma", "\\epsilon", "\\omega",
}
_BINARY_OPS = {"+", "-", "\\times", "\\div", "\\pm", "/"}
_RELATION_SYMS = {"=", "<", ">", "\\leq", "\\geq", "\\neq", "\\rightarrow", "\\in"}
_BRACKETS = {"(", ")", "[", "]", "\\{", "\\}", "|"}
BIG_OPERATORS = ("\\sum", "\\prod", "\\int", "\\lim")
_FUNCTIONS = {"\\sin", "\\cos", "\\tan", "\\log"}

FRACTION_BAR = "-"  # a bar with over/under children renders as \frac


class SymbolInventory:
    """Ordered label set with stable index <-> label mapping."""

    def __init__(self, labels):
        labels = list(labels)
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate labels in inventory")
        self.labels = labels
        self._index = {lab: i for i, lab in enumerate(labels)}

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"label {label!r} not in inventory") from None

    def index_or_oov(self, label: str) -> int:
        """Index of the label, or len(inventory) for out-of-vocabulary labels."""
        return self._index.get(label, len(self.labels))

    def label(self, index: int) -> str:
        return self.labels[index]

    @classmethod
    def from_file(cls, path) -> "SymbolInventory":
        text = Path(path).read_text(encoding="utf-8")
        return cls([ln.strip() for ln in text.splitlines() if ln.strip()])

    @classmethod
    def default(cls) -> "SymbolInventory":
        text = resources.files("inkmath.data").joinpath("crohme101.txt").read_text("utf-8")
        return cls([ln.strip() for ln in text.splitlines() if ln.strip()])


def struct_category(label: str) -> str:
    if len(label) == 1 and label.isdigit():
        return "digit"
    if len(label) == 1 and label.isalpha():
        return "latin"
    if label in _GREEK:
        return "greek"
    if label in _BINARY_OPS:
        return "binary_op"
    if label in _RELATION_SYMS:
        return "relation"
    if label in _BRACKETS:
        return "bracket"
    if label in BIG_OPERATORS:
        return "big_op"
    if label in _FUNCTIONS:
        return "function"
    return "other"


def struct_category_index(label: str) -> int:
    return STRUCT_CATEGORIES.index(struct_category(label))


def struct_mask(neighbor_labels) -> "list[int]":
    """9-feature binary mask: which coarse categories appear among the
    already-classified neighbor symbols."""
    mask = [0] * len(STRUCT_CATEGORIES)
    for lab in neighbor_labels:
        mask[struct_category_index(lab)] = 1
    return mask
