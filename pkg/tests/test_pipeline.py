"""Five-stage orchestration: oracle runs, toy-model runs, batch mode."""
import numpy as np
import pytest

from inkmath.errors import StageError
from inkmath.evalkit import aggregate, compare_slg
from inkmath.inkml import write_inkml
from inkmath.latex import slg_to_latex
from inkmath.mathml import slg_to_mathml
from inkmath.pipeline import (
    NetStages,
    OracleStages,
    Pipeline,
    reading_order,
    recognize_batch,
)
from inkmath.symbols import SymbolInventory
from inkmath.synth import compose, fig_style_fixture


def oracle_pipeline(ref_by_source, inventory, enable_correction=True):
    stages = OracleStages(lambda expr: ref_by_source[expr.source_id], inventory)
    return Pipeline(stages, inventory, enable_correction=enable_correction)


class TestOracleEndToEnd:
    def test_fig_fixture_exact(self, fig_fixture):
        expr, ref = fig_fixture
        inv = SymbolInventory.default()
        pipe = oracle_pipeline({expr.source_id: ref}, inv)
        result = pipe.recognize(expr)
        assert result.latex == "A_{2}>B_{2}"
        assert result.slg.structurally_equal(ref)
        assert result.mathml == slg_to_mathml(result.slg)

    def test_whole_fixture_corpus_exact(self, fixture_corpus):
        inv = SymbolInventory.default()
        refs = {expr.source_id: slg for expr, slg in fixture_corpus}
        pipe = oracle_pipeline(refs, inv)
        for expr, ref in fixture_corpus:
            result = pipe.recognize(expr)
            assert result.slg.structurally_equal(ref), expr.source_id
            assert result.latex == slg_to_latex(ref)

    def test_correction_disabled_matches_stage3(self, fig_fixture):
        expr, ref = fig_fixture
        inv = SymbolInventory.default()
        pipe = oracle_pipeline({expr.source_id: ref}, inv, enable_correction=False)
        result = pipe.recognize(expr)
        assert not result.correction_applied
        assert result.slg.structurally_equal(ref)

    def test_result_invariants(self, fig_fixture):
        expr, ref = fig_fixture
        inv = SymbolInventory.default()
        result = oracle_pipeline({expr.source_id: ref}, inv).recognize(expr)
        assert result.slg.validate(expression=expr) == []
        assert result.latex == slg_to_latex(result.slg)
        assert result.mathml == slg_to_mathml(result.slg)
        assert set(result.timings_ms) >= {"segment", "classify", "relate", "serialize"}
        assert all(s["score"] <= 1.0 for s in result.symbols)


class TestReadingOrder:
    def test_orders_by_min_x(self, fig_fixture):
        expr, ref = fig_fixture
        groups = [set(n.trace_ids) for n in ref.nodes]
        ordered = reading_order(groups[::-1], expr)
        labels = []
        by_traces = {n.trace_ids: n.label for n in ref.nodes}
        for g in ordered:
            labels.append(by_traces[frozenset(g)])
        assert labels == ["A", "2", ">", "B", "2"]


class TestToyModels:
    def test_single_symbol_recognition(self, toy_setup):
        expr, ref = compose("x", source_id="single")
        result = toy_setup["pipeline"].recognize(expr)
        assert len(result.slg.nodes) == 1
        assert result.latex == "x"

    def test_full_corpus_expression_accuracy(self, toy_setup):
        """End-to-end with the overfit toy models: 100% Exp on the
        20-expression corpus."""
        pipeline = toy_setup["pipeline"]
        tallies = []
        for expr, ref in toy_setup["corpus"]:
            result = pipeline.recognize(expr)
            tallies.append(compare_slg(result.slg, ref))
        report = aggregate(tallies)
        assert report.n_expressions == 20
        assert report.exp_rate == 1.0

    def test_stage5_idempotent_when_classes_unchanged(self, toy_setup):
        """Identity correction (oracle) leaves stage-3 edges untouched."""
        expr, ref = toy_setup["corpus"][0]
        inv = toy_setup["inventory"]
        nets = toy_setup["nets"]
        plain = Pipeline(NetStages(nets["segmenter"], nets["classifier"],
                                   nets["relator"], None, inv),
                         inv, enable_correction=False)
        res_a = plain.recognize(expr)

        class IdentityCorrect(NetStages):
            def correct(self, step_feats):
                return np.asarray(step_feats, dtype=float)[:, :len(inv)]

        ident = Pipeline(IdentityCorrect(nets["segmenter"], nets["classifier"],
                                         nets["relator"], None, inv),
                         inv, enable_correction=True)
        res_b = ident.recognize(expr)
        assert res_a.slg.structurally_equal(res_b.slg)

    def test_correction_fallback_on_overlength(self, toy_setup):
        """A capacity overflow falls back to uncorrected classes and flags."""
        inv = toy_setup["inventory"]
        nets = toy_setup["nets"]
        from inkmath.corrector import CorrNet
        tiny = CorrNet(n_classes=len(inv), d_model=8, layers=1, heads=2,
                       max_len=2, head_hidden=8, dropout=0.0,
                       rng=np.random.default_rng(0))
        pipe = Pipeline(NetStages(nets["segmenter"], nets["classifier"],
                                  nets["relator"], tiny, inv),
                        inv, enable_correction=True)
        expr, ref = toy_setup["corpus"][7]  # 1+2=x: five symbols > capacity
        result = pipe.recognize(expr)
        assert result.correction_fallback
        assert not result.correction_applied

    def test_stage_error_names_failing_stage(self, toy_setup):
        inv = toy_setup["inventory"]
        nets = toy_setup["nets"]

        class Broken(NetStages):
            def relate(self, features):
                raise RuntimeError("scripted failure")

        pipe = Pipeline(Broken(nets["segmenter"], nets["classifier"],
                               nets["relator"], None, inv), inv)
        expr, _ = toy_setup["corpus"][0]
        with pytest.raises(StageError, match="relate") as err:
            pipe.recognize(expr)
        assert "groups" in err.value.partial


class TestBatch:
    def test_empty_corpus(self, tmp_path, toy_setup):
        results, report = recognize_batch(tmp_path, toy_setup["pipeline"])
        assert results == [] and report is None

    def test_three_file_corpus_writes_outputs(self, tmp_path, toy_setup):
        corpus = toy_setup["corpus"][:3]
        in_dir = tmp_path / "in"
        in_dir.mkdir()
        for i, (expr, slg) in enumerate(corpus):
            (in_dir / f"b{i}.inkml").write_text(write_inkml(expr, slg), "utf-8")
        out_dir = tmp_path / "out"
        results, report = recognize_batch(in_dir, toy_setup["pipeline"],
                                          output_dir=out_dir)
        assert len(results) == 3
        assert sorted(p.name for p in out_dir.glob("*.lg")) == ["b0.lg", "b1.lg", "b2.lg"]
        assert report is not None and report.exp_rate == 1.0

    def test_batch_metrics_match_evalkit(self, tmp_path, toy_setup):
        """Aggregate from the batch runner equals a direct per-expression
        recount through compare_slg."""
        corpus = toy_setup["corpus"][:5]
        in_dir = tmp_path / "in"
        in_dir.mkdir()
        for i, (expr, slg) in enumerate(corpus):
            (in_dir / f"m{i}.inkml").write_text(write_inkml(expr, slg), "utf-8")
        results, report = recognize_batch(in_dir, toy_setup["pipeline"])
        direct = aggregate(compare_slg(res.slg, slg)
                           for res, (_, slg) in zip(results, corpus))
        assert report.as_dict() == direct.as_dict()
