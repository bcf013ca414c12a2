export interface Stroke {
  points: [number, number][]
}

export interface SymbolInfo {
  id: number
  label: string
  score: number
  trace_ids: number[]
}

export interface RecognizeResponse {
  lg: string
  latex: string
  mathml: string
  symbols: SymbolInfo[]
  timings_ms: Record<string, number>
  model_version: string
}

export type RecognizeClient = (traces: number[][][]) => Promise<RecognizeResponse>

export interface Box {
  xmin: number
  ymin: number
  xmax: number
  ymax: number
}
