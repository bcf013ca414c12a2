import assert from "node:assert/strict";
import { test } from "node:test";
import { colorOfTrace, computeOverlay, parseRelationLines, strokeBox } from "../src/overlay.js";
import { FIG_RESPONSE, FIG_STROKES } from "./fixtures.js";
test("figure fixture yields five colored groups and four arrows", () => {
    const overlay = computeOverlay(FIG_STROKES, FIG_RESPONSE);
    assert.equal(overlay.groups.length, 5);
    assert.equal(overlay.arrows.length, 4);
    assert.equal(overlay.latex, "A_{2}>B_{2}");
    const colors = new Set(overlay.groups.map((g) => g.color));
    assert.equal(colors.size, 5); // distinct colors per symbol
});
test("every stroke is covered by exactly one group", () => {
    const overlay = computeOverlay(FIG_STROKES, FIG_RESPONSE);
    const seen = new Map();
    for (const g of overlay.groups) {
        for (const t of g.traceIndices) {
            seen.set(t, (seen.get(t) ?? 0) + 1);
        }
    }
    for (let i = 0; i < FIG_STROKES.length; i++) {
        assert.equal(seen.get(i), 1, `stroke ${i}`);
        assert.notEqual(colorOfTrace(overlay, i), null);
    }
});
test("arrows connect group bounding-box centers", () => {
    const overlay = computeOverlay(FIG_STROKES, FIG_RESPONSE);
    const first = overlay.arrows[0]; // A -> subscript 2
    const aBox = strokeBox(FIG_STROKES, [0, 1, 2]);
    assert.deepEqual(first.from, [(aBox.xmin + aBox.xmax) / 2, (aBox.ymin + aBox.ymax) / 2]);
    assert.equal(first.relation, "sub");
});
test("relation line parsing skips O lines and keeps edge fields", () => {
    const edges = parseRelationLines(FIG_RESPONSE.lg);
    assert.deepEqual(edges.map((e) => [e.src, e.dst, e.relation]), [
        [0, 1, "sub"], [0, 2, "right"], [2, 3, "right"], [3, 4, "sub"],
    ]);
});
test("overlay is a pure function of its inputs", () => {
    const a = computeOverlay(FIG_STROKES, FIG_RESPONSE);
    const b = computeOverlay(FIG_STROKES, FIG_RESPONSE);
    assert.deepEqual(a, b);
    // input strokes are not mutated
    assert.deepEqual(FIG_STROKES[0].points, [[30, 80], [10, 140]]);
});
