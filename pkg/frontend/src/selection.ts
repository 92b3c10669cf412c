/** SelectionState: the source image, its drawn rectangles, and pending
 * query parameters.  Rectangles live in image coordinates; the emitted
 * query body is a pure function of this state.
 */

import type { Polarity, QueryBody, RectSpec } from "./types.js"
import type { Point, Viewport } from "./viewport.js"
import { clampToImage, screenToImage } from "./viewport.js"

/** Drags smaller than this (in screen pixels, either axis) are discarded. */
export const MIN_DRAG_PX = 3

export interface SelectionRect extends RectSpec {
  id: number
}

export interface SelectionState {
  sourceImage: string
  rects: SelectionRect[]
  tool: Polarity
  lambda: number
  limit: number
  excludeSource: boolean
  selectedRectId: number | null
  nextRectId: number
}

export function newSelection(sourceImage: string): SelectionState {
  return {
    sourceImage,
    rects: [],
    tool: "positive",
    lambda: 1.0,
    limit: 20,
    excludeSource: true,
    selectedRectId: null,
    nextRectId: 1,
  }
}

/** Finish a drag: convert both screen corners to image space, normalize
 * corner order, clamp to the image, and append a rect in the active
 * polarity.  Returns the unchanged state for degenerate drags. */
export function completeDrag(
  state: SelectionState,
  view: Viewport,
  start: Point,
  end: Point,
): SelectionState {
  if (
    Math.abs(end.x - start.x) < MIN_DRAG_PX ||
    Math.abs(end.y - start.y) < MIN_DRAG_PX
  ) {
    return state
  }
  const a = clampToImage(view, screenToImage(view, start))
  const b = clampToImage(view, screenToImage(view, end))
  const rect: SelectionRect = {
    id: state.nextRectId,
    x0: Math.min(a.x, b.x),
    y0: Math.min(a.y, b.y),
    x1: Math.max(a.x, b.x),
    y1: Math.max(a.y, b.y),
    polarity: state.tool,
  }
  return {
    ...state,
    rects: [...state.rects, rect],
    selectedRectId: rect.id,
    nextRectId: state.nextRectId + 1,
  }
}

export function removeRect(state: SelectionState, id: number): SelectionState {
  return {
    ...state,
    rects: state.rects.filter((r) => r.id !== id),
    selectedRectId: state.selectedRectId === id ? null : state.selectedRectId,
  }
}

export function removeSelectedRect(state: SelectionState): SelectionState {
  return state.selectedRectId === null
    ? state
    : removeRect(state, state.selectedRectId)
}

export function setTool(state: SelectionState, tool: Polarity): SelectionState {
  return { ...state, tool }
}

/** Submission needs at least one positive rectangle. */
export function canSubmit(state: SelectionState): boolean {
  return state.rects.some((r) => r.polarity === "positive")
}

/** The emitted query body; a pure function of the state.  Rect order is
 * preserved (draw order) and ids are stripped. */
export function buildQueryBody(state: SelectionState): QueryBody {
  return {
    source_image: state.sourceImage,
    rects: state.rects.map(({ x0, y0, x1, y1, polarity }) => ({
      x0,
      y0,
      x1,
      y1,
      polarity,
    })),
    lambda: state.lambda,
    limit: state.limit,
    exclude_source: state.excludeSource,
  }
}

/** Rect id at an image-space point (topmost / latest first), for
 * click-to-select. */
export function rectAt(state: SelectionState, p: Point): number | null {
  for (let i = state.rects.length - 1; i >= 0; i--) {
    const r = state.rects[i]
    if (p.x >= r.x0 && p.x <= r.x1 && p.y >= r.y0 && p.y <= r.y1) {
      return r.id
    }
  }
  return null
}
