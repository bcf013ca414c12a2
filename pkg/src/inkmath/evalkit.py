"""Label-graph metrics: Seg, Sym, Rel at the symbol level, Exp and Stru at
the expression level.

Node identity across hypothesis and reference is established by exact
trace-set match. A node is Seg-correct when such a match exists,
Sym-correct when the label also agrees, Rel-correct when it is
Seg-correct and its incoming edge matches the reference (same relation
label and same source trace group, or ROOT for both). An expression is
Exp-correct when every reference symbol is Seg+Sym+Rel correct and the
hypothesis has no extra symbols; Stru ignores symbol labels but keeps
the segmentation and relation requirements.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ComparisonError
from .slg import LINE_START, ROOT, StrokeLabelGraph


@dataclass
class ExpressionTally:
    seg_correct: int
    sym_correct: int
    rel_correct: int
    n_ref_symbols: int
    exp_correct: bool
    stru_correct: bool


@dataclass
class MetricsReport:
    seg_correct: int = 0
    sym_correct: int = 0
    rel_correct: int = 0
    n_symbols: int = 0
    exp_correct: int = 0
    stru_correct: int = 0
    n_expressions: int = 0

    def rate(self, correct: int, total: int) -> float:
        return correct / total if total else 1.0

    @property
    def seg_rate(self):
        return self.rate(self.seg_correct, self.n_symbols)

    @property
    def sym_rate(self):
        return self.rate(self.sym_correct, self.n_symbols)

    @property
    def rel_rate(self):
        return self.rate(self.rel_correct, self.n_symbols)

    @property
    def exp_rate(self):
        return self.rate(self.exp_correct, self.n_expressions)

    @property
    def stru_rate(self):
        return self.rate(self.stru_correct, self.n_expressions)

    def as_dict(self) -> dict:
        return {
            "seg": {"correct": self.seg_correct, "total": self.n_symbols, "rate": self.seg_rate},
            "sym": {"correct": self.sym_correct, "total": self.n_symbols, "rate": self.sym_rate},
            "rel": {"correct": self.rel_correct, "total": self.n_symbols, "rate": self.rel_rate},
            "exp": {"correct": self.exp_correct, "total": self.n_expressions, "rate": self.exp_rate},
            "stru": {"correct": self.stru_correct, "total": self.n_expressions, "rate": self.stru_rate},
        }

    def table(self) -> str:
        head = f"{'Metric':<6} {'Correct':>8} {'Total':>8} {'Rate':>8}"
        rows = [head, "-" * len(head)]
        for name, key in (("Seg", "seg"), ("Sym", "sym"), ("Rel", "rel"),
                          ("Exp", "exp"), ("Stru", "stru")):
            d = self.as_dict()[key]
            rows.append(f"{name:<6} {d['correct']:>8} {d['total']:>8} {d['rate']:>8.2%}")
        return "\n".join(rows)


def compare_slg(hyp: StrokeLabelGraph, ref: StrokeLabelGraph) -> ExpressionTally:
    """Per-expression tallies of hypothesis vs reference."""
    hyp_traces = hyp.trace_ids()
    ref_traces = ref.trace_ids()
    if hyp_traces != ref_traces:
        raise ComparisonError(
            f"trace universes differ: hyp has {sorted(hyp_traces - ref_traces)} extra, "
            f"misses {sorted(ref_traces - hyp_traces)}")

    hyp_by_traces = {n.trace_ids: n for n in hyp.nodes}
    hyp_group_of = {n.id: n.trace_ids for n in hyp.nodes}
    ref_group_of = {n.id: n.trace_ids for n in ref.nodes}
    hyp_incoming = {e.dst: e for e in hyp.edges}
    ref_incoming = {e.dst: e for e in ref.edges}

    seg = sym = rel = 0
    for ref_node in ref.nodes:
        match = hyp_by_traces.get(ref_node.trace_ids)
        if match is None:
            continue
        seg += 1
        if match.label == ref_node.label:
            sym += 1
        he = hyp_incoming[match.id]
        re_ = ref_incoming[ref_node.id]
        if he.label == re_.label:
            if he.src == ROOT and re_.src == ROOT:
                rel += 1
            elif he.src != ROOT and re_.src != ROOT and \
                    hyp_group_of[he.src] == ref_group_of[re_.src]:
                rel += 1

    total = len(ref.nodes)
    same_count = len(hyp.nodes) == len(ref.nodes)
    exp = same_count and seg == total and sym == total and rel == total
    stru = same_count and seg == total and rel == total
    return ExpressionTally(seg_correct=seg, sym_correct=sym, rel_correct=rel,
                           n_ref_symbols=total, exp_correct=exp, stru_correct=stru)


def aggregate(tallies) -> MetricsReport:
    """Order-independent corpus aggregation: sum counts, then rates."""
    report = MetricsReport()
    for t in tallies:
        report.seg_correct += t.seg_correct
        report.sym_correct += t.sym_correct
        report.rel_correct += t.rel_correct
        report.n_symbols += t.n_ref_symbols
        report.exp_correct += int(t.exp_correct)
        report.stru_correct += int(t.stru_correct)
        report.n_expressions += 1
    return report
