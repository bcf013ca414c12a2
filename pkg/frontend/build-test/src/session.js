// Ink session state: strokes captured from pointer events, debounced
// recognition after pen-up, single in-flight request with last-write-wins,
// and error handling that never loses strokes or the previous overlay.
import { computeOverlay } from "./overlay.js";
const defaultScheduler = {
    schedule: (fn, ms) => setTimeout(fn, ms),
    cancel: (h) => clearTimeout(h),
};
export class InkSession {
    constructor(client, opts = {}) {
        this.strokes = [];
        this.lastResponse = null;
        this.overlay = null;
        this.pending = false;
        this.timer = null;
        this.requestSeq = 0;
        this.client = client;
        this.debounceMs = opts.debounceMs ?? 400;
        this.scheduler = opts.scheduler ?? defaultScheduler;
        this.onOverlay = opts.onOverlay ?? (() => undefined);
        this.onError = opts.onError ?? (() => undefined);
    }
    /** Record a completed stroke (pointer-up) and schedule recognition. */
    addStroke(points) {
        if (points.length === 0)
            return;
        this.strokes.push({ points });
        this.scheduleRecognition();
    }
    /** Remove the newest stroke; recognition re-triggers on what remains. */
    undo() {
        if (this.strokes.length === 0)
            return false;
        this.strokes.pop();
        if (this.strokes.length === 0) {
            this.clear();
        }
        else {
            this.scheduleRecognition();
        }
        return true;
    }
    clear() {
        this.strokes = [];
        this.lastResponse = null;
        this.overlay = null;
        this.pending = false;
        this.requestSeq += 1; // orphan any in-flight response
        if (this.timer !== null) {
            this.scheduler.cancel(this.timer);
            this.timer = null;
        }
        this.onOverlay(null);
    }
    /** Exact request payload: coordinates equal captured points. */
    requestBody() {
        return this.strokes.map((s) => s.points.map(([x, y]) => [x, y]));
    }
    scheduleRecognition() {
        if (this.timer !== null)
            this.scheduler.cancel(this.timer);
        this.timer = this.scheduler.schedule(() => {
            this.timer = null;
            void this.fire();
        }, this.debounceMs);
    }
    async fire() {
        if (this.strokes.length === 0)
            return; // empty canvas: no request
        const seq = ++this.requestSeq;
        this.pending = true;
        const snapshot = this.strokes.slice();
        try {
            const response = await this.client(this.requestBody());
            if (seq !== this.requestSeq)
                return; // superseded: last write wins
            this.lastResponse = response;
            this.overlay = computeOverlay(snapshot, response);
            this.onOverlay(this.overlay);
        }
        catch (err) {
            if (seq !== this.requestSeq)
                return;
            // strokes and the previous overlay are kept untouched
            this.onError(err instanceof Error ? err.message : String(err));
        }
        finally {
            if (seq === this.requestSeq)
                this.pending = false;
        }
    }
}
