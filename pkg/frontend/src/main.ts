// Wiring: pointer capture on the canvas, undo/clear buttons, LaTeX
// output, and a non-blocking error toast.
import { makeHttpClient } from "./client.js"
import { drawScene } from "./render.js"
import { InkSession } from "./session.js"

const canvas = document.querySelector<HTMLCanvasElement>("#ink")!
const latexOut = document.querySelector<HTMLElement>("#latex")!
const toast = document.querySelector<HTMLElement>("#toast")!
const undoBtn = document.querySelector<HTMLButtonElement>("#undo")!
const clearBtn = document.querySelector<HTMLButtonElement>("#clear")!
const serverInput = document.querySelector<HTMLInputElement>("#server")!

const ctx = canvas.getContext("2d")!
let current: [number, number][] | null = null
let toastTimer: ReturnType<typeof setTimeout> | null = null

function showToast(message: string): void {
  toast.textContent = message
  toast.classList.add("visible")
  if (toastTimer) clearTimeout(toastTimer)
  toastTimer = setTimeout(() => toast.classList.remove("visible"), 4000)
}

function redraw(): void {
  drawScene(ctx, canvas.width, canvas.height, session.strokes, session.overlay, current)
  latexOut.textContent = session.overlay ? session.overlay.latex : ""
}

const session = new InkSession(
  (traces) => makeHttpClient(serverInput.value.replace(/\/$/, ""))(traces),
  {
    debounceMs: 400,
    onOverlay: () => redraw(),
    onError: (message) => {
      showToast(message) // strokes and the previous overlay stay put
      redraw()
    },
  },
)

function canvasPoint(e: PointerEvent): [number, number] {
  const rect = canvas.getBoundingClientRect()
  return [
    ((e.clientX - rect.left) / rect.width) * canvas.width,
    ((e.clientY - rect.top) / rect.height) * canvas.height,
  ]
}

canvas.addEventListener("pointerdown", (e) => {
  e.preventDefault()
  canvas.setPointerCapture(e.pointerId)
  current = [canvasPoint(e)]
  redraw()
})

canvas.addEventListener("pointermove", (e) => {
  if (!current) return
  e.preventDefault()
  current.push(canvasPoint(e))
  redraw()
})

function finishStroke(): void {
  if (!current) return
  session.addStroke(current)
  current = null
  redraw()
}

canvas.addEventListener("pointerup", (e) => {
  e.preventDefault()
  finishStroke()
})
canvas.addEventListener("pointercancel", () => {
  current = null
  redraw()
})

undoBtn.addEventListener("click", () => {
  session.undo()
  redraw()
})

clearBtn.addEventListener("click", () => {
  session.clear()
  redraw()
})

redraw()
