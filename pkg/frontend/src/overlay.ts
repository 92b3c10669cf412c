/** Canvas drawing helpers and the optional word-location overlay. */

import type { Polarity, RectSpec, WordOccurrence } from "./types.js"
import type { Viewport } from "./viewport.js"
import { imageToScreen } from "./viewport.js"

export const RECT_COLORS: Record<Polarity, string> = {
  positive: "#2e8b57",
  negative: "#c0392b",
}

export function drawRect(
  ctx: CanvasRenderingContext2D,
  view: Viewport,
  rect: RectSpec,
  selected: boolean,
): void {
  const a = imageToScreen(view, { x: rect.x0, y: rect.y0 })
  const b = imageToScreen(view, { x: rect.x1, y: rect.y1 })
  ctx.beginPath()
  ctx.rect(a.x, a.y, b.x - a.x, b.y - a.y)
  ctx.strokeStyle = RECT_COLORS[rect.polarity]
  ctx.lineWidth = selected ? 3 : 1.5
  ctx.stroke()
}

export function drawWordMarkers(
  ctx: CanvasRenderingContext2D,
  view: Viewport,
  words: WordOccurrence[],
): void {
  ctx.fillStyle = "rgba(30, 100, 200, 0.55)"
  for (const w of words) {
    for (const [x, y] of w.locations) {
      const p = imageToScreen(view, { x, y })
      ctx.beginPath()
      ctx.arc(p.x, p.y, 2.5, 0, 2 * Math.PI)
      ctx.fill()
    }
  }
}

/** Distinct word indices whose occurrences fall inside any rect of the
 * given polarity.  Containment is closed on all edges, matching the
 * server's query semantics, so the live count previews the actual query. */
export function capturedWords(
  words: WordOccurrence[],
  rects: RectSpec[],
  polarity: Polarity,
): Set<number> {
  const out = new Set<number>()
  for (const w of words) {
    for (const [x, y] of w.locations) {
      for (const r of rects) {
        if (
          r.polarity === polarity &&
          x >= r.x0 &&
          x <= r.x1 &&
          y >= r.y0 &&
          y <= r.y1
        ) {
          out.add(w.index)
        }
      }
    }
  }
  return out
}
