// Overlay computation is a pure function of (strokes, response): trace
// groups colored per symbol, relation arrows between group bounding-box
// centers, and the LaTeX string. No stroke geometry is ever mutated.
import { Box, RecognizeResponse, Stroke } from "./types.js"

export const PALETTE = [
  "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4",
  "#46f0f0", "#f032e6", "#9a6324", "#008080", "#808000",
]

export interface OverlayGroup {
  symbolId: number
  label: string
  traceIndices: number[]
  color: string
  bbox: Box
}

export interface OverlayArrow {
  from: [number, number]
  to: [number, number]
  relation: string
}

export interface Overlay {
  groups: OverlayGroup[]
  arrows: OverlayArrow[]
  latex: string
}

export function strokeBox(strokes: Stroke[], indices: number[]): Box {
  let xmin = Infinity, ymin = Infinity, xmax = -Infinity, ymax = -Infinity
  for (const i of indices) {
    const s = strokes[i]
    if (!s) continue
    for (const [x, y] of s.points) {
      if (x < xmin) xmin = x
      if (x > xmax) xmax = x
      if (y < ymin) ymin = y
      if (y > ymax) ymax = y
    }
  }
  return { xmin, ymin, xmax, ymax }
}

function center(b: Box): [number, number] {
  return [(b.xmin + b.xmax) / 2, (b.ymin + b.ymax) / 2]
}

// R lines in the label-graph text carry the non-root relation edges:
// "R, <src>, <dst>, <relation>, 1.0"
export function parseRelationLines(lg: string): { src: number; dst: number; relation: string }[] {
  const out: { src: number; dst: number; relation: string }[] = []
  for (const raw of lg.split("\n")) {
    const line = raw.trim()
    if (!line.startsWith("R,")) continue
    const parts = line.split(",").map((p) => p.trim())
    if (parts.length >= 4) {
      out.push({ src: Number(parts[1]), dst: Number(parts[2]), relation: parts[3] })
    }
  }
  return out
}

export function computeOverlay(strokes: Stroke[], response: RecognizeResponse): Overlay {
  const symbols = [...response.symbols].sort((a, b) => a.id - b.id)
  const groups: OverlayGroup[] = symbols.map((sym, i) => ({
    symbolId: sym.id,
    label: sym.label,
    traceIndices: [...sym.trace_ids],
    color: PALETTE[i % PALETTE.length],
    bbox: strokeBox(strokes, sym.trace_ids),
  }))
  const byId = new Map(groups.map((g) => [g.symbolId, g]))
  const arrows: OverlayArrow[] = []
  for (const edge of parseRelationLines(response.lg)) {
    const src = byId.get(edge.src)
    const dst = byId.get(edge.dst)
    if (src && dst) {
      arrows.push({ from: center(src.bbox), to: center(dst.bbox), relation: edge.relation })
    }
  }
  return { groups, arrows, latex: response.latex }
}

export function colorOfTrace(overlay: Overlay | null, traceIndex: number): string | null {
  if (!overlay) return null
  for (const g of overlay.groups) {
    if (g.traceIndices.includes(traceIndex)) return g.color
  }
  return null
}
