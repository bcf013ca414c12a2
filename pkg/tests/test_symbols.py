"""Symbol inventory and structural category mapping."""
import pytest

from inkmath.symbols import (
    STRUCT_CATEGORIES,
    SymbolInventory,
    struct_category,
    struct_mask,
)


def test_default_inventory_has_101_classes():
    inv = SymbolInventory.default()
    assert len(inv) == 101
    assert "0" in inv and "\\sum" in inv and "\\alpha" in inv


def test_index_label_round_trip_across_save_load(tmp_path):
    inv = SymbolInventory.default()
    path = tmp_path / "inventory.txt"
    path.write_text("\n".join(inv.labels) + "\n", encoding="utf-8")
    loaded = SymbolInventory.from_file(path)
    assert loaded.labels == inv.labels
    for i, label in enumerate(inv.labels):
        assert loaded.index(label) == i
        assert loaded.label(i) == label


def test_duplicate_labels_rejected():
    with pytest.raises(ValueError):
        SymbolInventory(["x", "x"])


def test_oov_bucket():
    inv = SymbolInventory(["a", "b"])
    assert inv.index_or_oov("zz") == 2
    assert inv.index_or_oov("a") == 0
    with pytest.raises(KeyError):
        inv.index("zz")


@pytest.mark.parametrize("label,category", [
    ("7", "digit"), ("x", "latin"), ("B", "latin"), ("\\alpha", "greek"),
    ("+", "binary_op"), ("-", "binary_op"), ("=", "relation"), ("<", "relation"),
    ("(", "bracket"), ("\\{", "bracket"), ("\\sum", "big_op"), ("\\lim", "big_op"),
    ("\\sin", "function"), ("\\sqrt", "other"), (",", "other"),
])
def test_struct_categories(label, category):
    assert struct_category(label) == category


def test_struct_mask_is_binary_per_category():
    mask = struct_mask(["7", "3", "x", "\\sum"])
    assert len(mask) == len(STRUCT_CATEGORIES)
    assert set(mask) <= {0, 1}
    assert mask[STRUCT_CATEGORIES.index("digit")] == 1
    assert mask[STRUCT_CATEGORIES.index("latin")] == 1
    assert mask[STRUCT_CATEGORIES.index("big_op")] == 1
    assert mask[STRUCT_CATEGORIES.index("greek")] == 0
