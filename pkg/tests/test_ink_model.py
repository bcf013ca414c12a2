"""Core data model, LG text, LaTeX/MathML conversion, and InkML round
trips."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inkmath.errors import (
    ConversionError,
    InkmlParseError,
    IntegrityError,
    LatexParseError,
    StructureError,
)
from inkmath.ink import Expression, Point, Trace
from inkmath.inkml import parse_inkml, write_inkml
from inkmath.latex import (
    normalize_latex,
    parse_latex_structure,
    plan_to_latex,
    slg_to_latex,
)
from inkmath.lg import parse_lg, write_lg
from inkmath.mathml import mathml_to_layout, slg_to_mathml
from inkmath.layout import layout_to_plan
from inkmath.slg import (
    LINE_START,
    OVER,
    RIGHT,
    ROOT,
    SUB,
    SUP,
    UNDER,
    Edge,
    StrokeLabelGraph,
    SymbolNode,
    check_slg,
)


def make_slg(nodes, edges):
    return StrokeLabelGraph(
        nodes=tuple(SymbolNode(id=i, trace_ids=frozenset(ts), label=lab)
                    for i, ts, lab in nodes),
        edges=tuple(Edge(src=s, dst=d, label=r) for s, d, r in edges),
    )


def fig_graph():
    return make_slg(
        [(0, {0, 1}, "A"), (1, {2}, "2"), (2, {3}, ">"), (3, {4, 5}, "B"), (4, {6}, "2")],
        [(ROOT, 0, LINE_START), (0, 1, SUB), (0, 2, RIGHT), (2, 3, RIGHT), (3, 4, SUB)],
    )


class TestTypes:
    def test_point_rejects_nan(self):
        with pytest.raises(ValueError):
            Point(float("nan"), 0.0)

    def test_trace_needs_points(self):
        with pytest.raises(ValueError):
            Trace(0, np.zeros((0, 2)))

    def test_trace_immutable(self):
        t = Trace(0, [[0.0, 0.0], [1.0, 1.0]])
        with pytest.raises(ValueError):
            t.points[0, 0] = 5.0

    def test_expression_rejects_duplicate_ids(self):
        with pytest.raises(ValueError):
            Expression(traces=(Trace(0, [[0, 0]]), Trace(0, [[1, 1]])))


class TestSlgInvariants:
    def test_valid_graph_accepted(self):
        g = fig_graph()
        assert g.validate() == []
        assert g.root_id() == 0

    def test_two_line_starts_rejected(self):
        with pytest.raises(StructureError):
            make_slg([(0, {0}, "x"), (1, {1}, "y")],
                     [(ROOT, 0, LINE_START), (ROOT, 1, LINE_START)])

    def test_double_incoming_rejected(self):
        with pytest.raises(StructureError):
            make_slg([(0, {0}, "x"), (1, {1}, "y")],
                     [(ROOT, 0, LINE_START), (0, 1, RIGHT), (0, 1, SUP)])

    def test_cycle_rejected(self):
        problems = check_slg(
            [SymbolNode(0, frozenset({0}), "x"), SymbolNode(1, frozenset({1}), "y"),
             SymbolNode(2, frozenset({2}), "z")],
            [Edge(ROOT, 0, LINE_START), Edge(2, 1, RIGHT), Edge(1, 2, RIGHT)],
        )
        assert any("cycle" in p for p in problems)

    def test_overlapping_trace_groups_rejected(self):
        with pytest.raises(StructureError):
            make_slg([(0, {0, 1}, "x"), (1, {1}, "y")],
                     [(ROOT, 0, LINE_START), (0, 1, RIGHT)])

    def test_coverage_check_against_expression(self):
        g = make_slg([(0, {5}, "x")], [(ROOT, 0, LINE_START)])
        expr = Expression(traces=(Trace(0, [[0, 0]]),))
        assert any("unknown trace ids" in p for p in g.validate(expression=expr))


class TestLgFormat:
    def test_single_node(self):
        g = make_slg([(0, {0}, "x")], [(ROOT, 0, LINE_START)])
        text = write_lg(g)
        assert text == "O, 0, x, 1.0, 0\n"
        assert parse_lg(text).structurally_equal(g)

    def test_fig_graph_line_counts(self):
        text = write_lg(fig_graph())
        lines = text.strip().split("\n")
        assert sum(1 for l in lines if l.startswith("O")) == 5
        assert sum(1 for l in lines if l.startswith("R")) == 4

    def test_round_trip_exact_bytes(self):
        g = fig_graph()
        text = write_lg(g)
        assert write_lg(parse_lg(text)) == text

    def test_duplicate_incoming_rejected(self):
        text = ("O, 0, x, 1.0, 0\nO, 1, y, 1.0, 1\nO, 2, z, 1.0, 2\n"
                "R, 0, 2, right, 1.0\nR, 1, 2, sup, 1.0\n")
        with pytest.raises(StructureError, match="duplicate incoming"):
            parse_lg(text)

    def test_missing_root_rejected(self):
        text = ("O, 0, x, 1.0, 0\nO, 1, y, 1.0, 1\n"
                "R, 0, 1, right, 1.0\nR, 1, 0, right, 1.0\n")
        with pytest.raises(StructureError):
            parse_lg(text)

    def test_comma_label_escaped(self):
        g = make_slg([(0, {0}, ",")], [(ROOT, 0, LINE_START)])
        text = write_lg(g)
        assert "COMMA" in text
        assert parse_lg(text).node(0).label == ","

    @given(st.integers(min_value=1, max_value=8), st.integers(min_value=0, max_value=10 ** 6))
    @settings(max_examples=60, deadline=None)
    def test_property_round_trip(self, n, seed):
        rng = np.random.default_rng(seed)
        labels = ["x", "y", "2", "+", "\\alpha"]
        nodes = []
        tid = 0
        for i in range(n):
            k = int(rng.integers(1, 4))
            nodes.append((i, set(range(tid, tid + k)), labels[int(rng.integers(0, 5))]))
            tid += k
        edges = [(ROOT, 0, LINE_START)]
        rels = [RIGHT, SUP, SUB, OVER, UNDER]
        for j in range(1, n):
            src = int(rng.integers(0, j))
            edges.append((src, j, rels[int(rng.integers(0, 5))]))
        g = make_slg(nodes, edges)
        assert parse_lg(write_lg(g)).structurally_equal(g)
        assert write_lg(parse_lg(write_lg(g))) == write_lg(g)


class TestLatex:
    def test_fig_graph(self):
        assert slg_to_latex(fig_graph()) == "A_{2}>B_{2}"

    def test_single_node(self):
        g = make_slg([(0, {0}, "x")], [(ROOT, 0, LINE_START)])
        assert slg_to_latex(g) == "x"

    def test_fraction(self):
        g = make_slg([(0, {0}, "-"), (1, {1}, "1"), (2, {2}, "2")],
                     [(ROOT, 0, LINE_START), (0, 1, OVER), (0, 2, UNDER)])
        assert slg_to_latex(g) == "\\frac{1}{2}"

    def test_big_operator_limits(self):
        g = make_slg([(0, {0}, "\\sum"), (1, {1}, "n"), (2, {2}, "7")],
                     [(ROOT, 0, LINE_START), (0, 1, UNDER), (0, 2, OVER)])
        assert slg_to_latex(g) == "\\sum_{n}^{7}"

    def test_over_under_on_plain_symbol_errors(self):
        g = make_slg([(0, {0}, "x"), (1, {1}, "1"), (2, {2}, "2")],
                     [(ROOT, 0, LINE_START), (0, 1, OVER), (0, 2, UNDER)])
        with pytest.raises(ConversionError, match="x"):
            slg_to_latex(g)

    def test_parse_structure_simple(self):
        steps = parse_latex_structure("x")
        assert len(steps) == 1
        assert steps[0].rel == LINE_START

    def test_parse_structure_fig(self):
        steps = parse_latex_structure("A_2>B_2")
        assert [(s.symbol, s.rel) for s in steps] == [
            ("A", LINE_START), ("2", SUB), (">", RIGHT), ("B", RIGHT), ("2", SUB)]
        assert steps[1].ref_index == 0  # the sub 2 hangs off A
        assert steps[2].ref_index == 0  # so does >

    def test_parse_structure_fraction(self):
        steps = parse_latex_structure("\\frac{1}{2}")
        assert [(s.symbol, s.rel) for s in steps] == [
            ("-", LINE_START), ("1", OVER), ("2", UNDER)]

    def test_unsupported_command(self):
        with pytest.raises(LatexParseError):
            parse_latex_structure("\\notacommand{x}")

    def test_unbalanced_braces(self):
        with pytest.raises(LatexParseError):
            parse_latex_structure("x^{2")

    def test_normalization_canonicalizes_braces(self):
        assert normalize_latex("A_2>B_2") == "A_{2}>B_{2}"
        assert normalize_latex(" A _ {2} > B _2 ") == "A_{2}>B_{2}"

    def test_fixed_point(self):
        for latex in ("A_{2}>B_{2}", "\\frac{1}{2}", "x^{2}+y_{1}", "\\sum_{n}^{7}x"):
            once = plan_to_latex(parse_latex_structure(latex))
            assert once == latex
            assert plan_to_latex(parse_latex_structure(once)) == once


class TestMathml:
    def test_single_symbol(self):
        g = make_slg([(0, {0}, "x")], [(ROOT, 0, LINE_START)])
        xml = slg_to_mathml(g)
        assert xml.startswith("<math")
        assert "<mi" in xml and ">x</mi>" in xml

    def test_subscript_structure(self):
        g = make_slg([(0, {0}, "A"), (1, {1}, "2")],
                     [(ROOT, 0, LINE_START), (0, 1, SUB)])
        xml = slg_to_mathml(g)
        assert "<msub>" in xml and "<mn" in xml

    def test_fig_graph_structure(self):
        xml = slg_to_mathml(fig_graph())
        assert xml.count("<msub>") == 2
        assert "<mrow>" in xml and "&gt;" in xml

    def test_mathml_round_trip(self):
        for g in (fig_graph(),
                  make_slg([(0, {0}, "-"), (1, {1}, "1"), (2, {2}, "2")],
                           [(ROOT, 0, LINE_START), (0, 1, OVER), (0, 2, UNDER)])):
            layout = mathml_to_layout(slg_to_mathml(g))
            assert [s.symbol for s in layout_to_plan(layout)] == \
                [n.label for n in g.nodes]

    def test_over_under_on_plain_symbol_errors(self):
        g = make_slg([(0, {0}, "x"), (1, {1}, "1"), (2, {2}, "2")],
                     [(ROOT, 0, LINE_START), (0, 1, OVER), (0, 2, UNDER)])
        with pytest.raises(ConversionError, match="x"):
            slg_to_mathml(g)


class TestInkml:
    def test_two_plain_traces(self):
        doc = ('<ink xmlns="http://www.w3.org/2003/InkML">'
               '<trace id="0">0 0, 1 1</trace><trace id="1">2 0, 3 1</trace></ink>')
        expr, slg = parse_inkml(doc)
        assert len(expr.traces) == 2
        assert all(len(t) == 2 for t in expr.traces)
        assert slg is None

    def test_extra_channels_dropped(self):
        doc = ('<ink><trace id="0">0 0 100 0.5, 1 1 110 0.6</trace></ink>')
        expr, _ = parse_inkml(doc)
        assert expr.traces[0].points.shape == (2, 2)

    def test_malformed_xml_reports_position(self):
        with pytest.raises(InkmlParseError) as err:
            parse_inkml("<ink><trace>0 0</trace>")
        assert err.value.line is not None

    def test_unknown_trace_ref_is_integrity_error(self):
        doc = ('<ink><trace id="0">0 0</trace>'
               '<traceGroup><traceGroup>'
               '<annotation type="truth">x</annotation>'
               '<traceView traceDataRef="99"/>'
               '</traceGroup></traceGroup></ink>')
        with pytest.raises(IntegrityError):
            parse_inkml(doc)

    def test_crohme_style_groups_reconstruct_slg(self):
        doc = ('<ink xmlns="http://www.w3.org/2003/InkML">'
               '<annotation type="truth">$A_2$</annotation>'
               '<trace id="10">0 0, 0 1</trace>'
               '<trace id="11">1 0, 1 1</trace>'
               '<trace id="12">2 0, 2 1</trace>'
               '<traceGroup xml:id="TG0">'
               '<annotation type="truth">Segmentation</annotation>'
               '<traceGroup xml:id="TG1"><annotation type="truth">A</annotation>'
               '<traceView traceDataRef="10"/><traceView traceDataRef="11"/></traceGroup>'
               '<traceGroup xml:id="TG2"><annotation type="truth">2</annotation>'
               '<traceView traceDataRef="12"/></traceGroup>'
               '</traceGroup></ink>')
        expr, slg = parse_inkml(doc)
        assert slg is not None
        assert len(slg.nodes) == 2
        assert slg.node(0).label == "A" and slg.node(0).trace_ids == {0, 1}
        assert slg.incoming_edge(1).label == SUB

    def test_write_parse_round_trip(self, fixture_corpus):
        for expr, slg in fixture_corpus[:10]:
            text = write_inkml(expr, slg)
            expr2, slg2 = parse_inkml(text)
            assert len(expr2.traces) == len(expr.traces)
            for a, b in zip(expr.traces, expr2.traces):
                assert np.allclose(a.points, b.points, atol=1e-9)
            assert slg2 is not None and slg2.structurally_equal(slg)


class TestFixtureCorpusRoundTrips:
    def test_inkml_slg_lg_round_trip(self, fixture_corpus):
        assert len(fixture_corpus) >= 30
        for expr, slg in fixture_corpus:
            text = write_inkml(expr, slg)
            _, slg2 = parse_inkml(text)
            lg1 = write_lg(slg2)
            slg3 = parse_lg(lg1)
            assert slg3.structurally_equal(slg)
            assert write_lg(slg3) == lg1  # byte-exact

    def test_latex_fixed_point(self, fixture_corpus):
        for _, slg in fixture_corpus:
            latex = slg_to_latex(slg)
            again = plan_to_latex(parse_latex_structure(latex))
            assert again == latex
