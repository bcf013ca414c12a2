// Canvas drawing: strokes colored by their symbol group, relation arrows
// between group centers. Pure consumers of (strokes, overlay).
import { colorOfTrace, Overlay } from "./overlay.js"
import { Stroke } from "./types.js"

export function drawScene(ctx: CanvasRenderingContext2D, width: number, height: number,
                          strokes: Stroke[], overlay: Overlay | null,
                          current: [number, number][] | null = null): void {
  ctx.clearRect(0, 0, width, height)
  ctx.lineWidth = 2.5
  ctx.lineCap = "round"
  ctx.lineJoin = "round"

  strokes.forEach((stroke, i) => {
    ctx.strokeStyle = colorOfTrace(overlay, i) ?? "#222"
    drawPolyline(ctx, stroke.points)
  })
  if (current && current.length > 1) {
    ctx.strokeStyle = "#222"
    drawPolyline(ctx, current)
  }
  if (overlay) {
    for (const arrow of overlay.arrows) {
      drawArrow(ctx, arrow.from, arrow.to, arrow.relation)
    }
  }
}

function drawPolyline(ctx: CanvasRenderingContext2D, points: [number, number][]): void {
  if (points.length === 0) return
  ctx.beginPath()
  ctx.moveTo(points[0][0], points[0][1])
  if (points.length === 1) {
    ctx.lineTo(points[0][0] + 0.1, points[0][1])
  }
  for (const [x, y] of points.slice(1)) ctx.lineTo(x, y)
  ctx.stroke()
}

function drawArrow(ctx: CanvasRenderingContext2D, from: [number, number],
                   to: [number, number], label: string): void {
  const [x0, y0] = from
  const [x1, y1] = to
  ctx.save()
  ctx.strokeStyle = "rgba(40, 40, 40, 0.75)"
  ctx.fillStyle = "rgba(40, 40, 40, 0.9)"
  ctx.lineWidth = 1.5
  ctx.beginPath()
  ctx.moveTo(x0, y0)
  ctx.lineTo(x1, y1)
  ctx.stroke()

  const angle = Math.atan2(y1 - y0, x1 - x0)
  const head = 7
  ctx.beginPath()
  ctx.moveTo(x1, y1)
  ctx.lineTo(x1 - head * Math.cos(angle - 0.45), y1 - head * Math.sin(angle - 0.45))
  ctx.lineTo(x1 - head * Math.cos(angle + 0.45), y1 - head * Math.sin(angle + 0.45))
  ctx.closePath()
  ctx.fill()

  ctx.font = "11px sans-serif"
  ctx.fillText(label, (x0 + x1) / 2 + 4, (y0 + y1) / 2 - 4)
  ctx.restore()
}
