export const FIG_STROKES = [
    { points: [[30, 80], [10, 140]] }, // A left diagonal
    { points: [[30, 80], [50, 140]] }, // A right diagonal
    { points: [[18, 115], [42, 115]] }, // A crossbar
    { points: [[58, 150], [70, 165], [58, 180]] }, // subscript 2
    { points: [[90, 100], [120, 120], [90, 140]] }, // >
    { points: [[140, 80], [140, 140]] }, // B spine
    { points: [[140, 80], [160, 95], [140, 110], [162, 125], [140, 140]] }, // B bumps
    { points: [[170, 150], [182, 165], [170, 180]] }, // subscript 2
];
export const FIG_RESPONSE = {
    lg: [
        "O, 0, A, 1.0, 0, 1, 2",
        "O, 1, 2, 1.0, 3",
        "O, 2, >, 1.0, 4",
        "O, 3, B, 1.0, 5, 6",
        "O, 4, 2, 1.0, 7",
        "R, 0, 1, sub, 1.0",
        "R, 0, 2, right, 1.0",
        "R, 2, 3, right, 1.0",
        "R, 3, 4, sub, 1.0",
    ].join("\n") + "\n",
    latex: "A_{2}>B_{2}",
    mathml: "<math><mrow><msub><mi>A</mi><mn>2</mn></msub><mo>&gt;</mo>"
        + "<msub><mi>B</mi><mn>2</mn></msub></mrow></math>",
    symbols: [
        { id: 0, label: "A", score: 1.0, trace_ids: [0, 1, 2] },
        { id: 1, label: "2", score: 1.0, trace_ids: [3] },
        { id: 2, label: ">", score: 1.0, trace_ids: [4] },
        { id: 3, label: "B", score: 1.0, trace_ids: [5, 6] },
        { id: 4, label: "2", score: 1.0, trace_ids: [7] },
    ],
    timings_ms: { segment: 1.0 },
    model_version: "stub",
};
/** Deterministic stand-in for setTimeout: fire on demand. */
export function manualScheduler() {
    let nextId = 1;
    const pending = new Map();
    return {
        schedule(fn) {
            const id = nextId++;
            pending.set(id, fn);
            return id;
        },
        cancel(handle) {
            pending.delete(handle);
        },
        flush() {
            const fns = [...pending.values()];
            pending.clear();
            for (const fn of fns)
                fn();
        },
        pendingCount() {
            return pending.size;
        },
    };
}
export function flushMicrotasks() {
    return new Promise((resolve) => setTimeout(resolve, 0));
}
